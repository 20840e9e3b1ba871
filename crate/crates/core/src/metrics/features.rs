use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// One feature vector per shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    rows: Vec<Vec<f64>>,
}

impl FeatureSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("feature rows differ in length"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(FeatureSet { rows })
    }

    /// One row per line, comma-separated; a leading non-numeric line is a header.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if rows.is_empty() && n == 0 => continue,
                Err(_) => return Err(Error::Format(format!("line {}: non-numeric feature", n + 1))),
            }
        }
        FeatureSet::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn mean_cov(&self) -> (DVector<f64>, DMatrix<f64>) {
        let (n, d) = (self.len(), self.dim());
        let mut mu = DVector::zeros(d);
        for r in &self.rows {
            mu += DVector::from_column_slice(r);
        }
        mu /= n as f64;
        let mut cov = DMatrix::zeros(d, d);
        for r in &self.rows {
            let c = DVector::from_column_slice(r) - &mu;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        (mu, cov)
    }
}

fn check_pair(a: &FeatureSet, b: &FeatureSet) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooFew {
            requested: 2,
            available: a.len().min(b.len()),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("feature dimensions {} and {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Eigenvalues below `-tol * max(1, λ_max)` are an error; the rest clamp to 0.
fn clamped_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    const TOL: f64 = 1e-10;
    let sym = (&m + m.transpose()) * 0.5;
    let mut eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.iter().cloned().fold(1.0, f64::max);
    for l in eig.eigenvalues.iter_mut() {
        if *l < -TOL * scale {
            return Err(Error::Numeric(format!("matrix has negative eigenvalue {l}")));
        }
        *l = l.max(0.0);
    }
    Ok(eig)
}

fn sqrtm(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = clamped_eigen(m)?;
    let root = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// `|μ_a − μ_b|² + Tr(Σ_a + Σ_b − 2 (Σ_a Σ_b)^{1/2})` with unbiased
/// covariances. The trace of the cross term is taken as
/// `Tr((Σ_a^{1/2} Σ_b Σ_a^{1/2})^{1/2})`, which is symmetric.
pub fn frechet_feature_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    check_pair(a, b)?;
    let (ma, ca) = a.mean_cov();
    let (mb, cb) = b.mean_cov();
    let ra = sqrtm(ca.clone())?;
    let inner = &ra * &cb * &ra;
    let cross: f64 = clamped_eigen(inner)?.eigenvalues.iter().map(|l| l.sqrt()).sum();
    let diff = (ma - mb).norm_squared();
    Ok((diff + ca.trace() + cb.trace() - 2.0 * cross).max(0.0))
}

fn poly_kernel(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / x.len() as f64 + 1.0).powi(3)
}

/// Unbiased MMD² with the cubic polynomial kernel `(xᵀy / dim + 1)³`.
pub fn kernel_feature_distance(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    check_pair(a, b)?;
    let (m, n) = (a.len(), b.len());
    let within = |s: &FeatureSet| {
        let mut total = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if i != j {
                    total += poly_kernel(&s.rows[i], &s.rows[j]);
                }
            }
        }
        total
    };
    let mut cross = 0.0;
    for x in &a.rows {
        for y in &b.rows {
            cross += poly_kernel(x, y);
        }
    }
    Ok(within(a) / (m * (m - 1)) as f64 + within(b) / (n * (n - 1)) as f64 - 2.0 * cross / (m * n) as f64)
}
