//! Minimal PLY codec: ASCII and binary little-endian input, binary
//! little-endian output. Only vertex `x`, `y`, `z` (and an optional
//! `radius`) and face index lists are interpreted.

use crate::error::{Error, Result};
use crate::geom::Point3;

#[derive(Debug, Default)]
pub(crate) struct Ply {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
    pub radius: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Format(format!("unknown PLY type {other:?}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

enum Cursor<'a> {
    Ascii(std::str::SplitWhitespace<'a>),
    Binary(&'a [u8]),
}

impl Cursor<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        match self {
            Cursor::Ascii(it) => it
                .next()
                .ok_or_else(|| Error::Format("PLY body truncated".into()))?
                .parse()
                .map_err(|_| Error::Format("bad PLY number".into())),
            Cursor::Binary(b) => {
                let n = ty.size();
                if b.len() < n {
                    return Err(Error::Format("PLY body truncated".into()));
                }
                let v = ty.read_le(b);
                *b = &b[n..];
                Ok(v)
            }
        }
    }
}

pub(crate) fn read(bytes: &[u8]) -> Result<Ply> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Format("missing PLY end_header".into()))?;
    let mut body_start = end + END.len();
    while body_start < bytes.len() && bytes[body_start] != b'\n' {
        body_start += 1;
    }
    body_start += 1;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Format("non-UTF-8 PLY header".into()))?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Format("missing PLY magic".into()));
    }
    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => binary = false,
            ["format", "binary_little_endian", ..] => binary = true,
            ["format", other, ..] => return Err(Error::Format(format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::Format("bad element count".into()))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, item, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before element".into()))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(cnt)?, Scalar::parse(item)?)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Format("property before element".into()))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => {}
        }
    }
    let body = &bytes[body_start.min(bytes.len())..];
    let mut cur = if binary {
        Cursor::Binary(body)
    } else {
        Cursor::Ascii(
            std::str::from_utf8(body)
                .map_err(|_| Error::Format("non-UTF-8 ASCII PLY body".into()))?
                .split_whitespace(),
        )
    };
    let mut out = Ply::default();
    for el in &elements {
        let find = |n: &str| {
            el.props
                .iter()
                .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
        };
        let (xi, yi, zi, ri) = (find("x"), find("y"), find("z"), find("radius"));
        if el.name == "vertex" && (xi.is_none() || yi.is_none() || zi.is_none()) {
            return Err(Error::Format("PLY vertex element lacks x/y/z".into()));
        }
        if el.name == "vertex" && ri.is_some() {
            out.radius = Some(Vec::with_capacity(el.count));
        }
        for _ in 0..el.count {
            let mut scalars = vec![0.0; el.props.len()];
            let mut list: Vec<usize> = Vec::new();
            for (pi, prop) in el.props.iter().enumerate() {
                match prop {
                    Property::Scalar(_, ty) => scalars[pi] = cur.next(*ty)?,
                    Property::List(name, cnt, item) => {
                        let n = cur.next(*cnt)? as usize;
                        let keep = name == "vertex_indices" || name == "vertex_index";
                        for _ in 0..n {
                            let v = cur.next(*item)?;
                            if keep {
                                list.push(v as usize);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                out.vertices.push([scalars[xi.unwrap()], scalars[yi.unwrap()], scalars[zi.unwrap()]]);
                if let (Some(r), Some(ri)) = (out.radius.as_mut(), ri) {
                    r.push(scalars[ri]);
                }
            } else if el.name == "face" && list.len() >= 3 {
                for k in 1..list.len() - 1 {
                    out.faces.push([list[0], list[k], list[k + 1]]);
                }
            }
        }
    }
    Ok(out)
}

/// Binary little-endian PLY with float32 vertex coordinates, an optional
/// float32 `radius` per vertex, and `uchar`/`int` face lists.
pub(crate) fn encode(vertices: &[Point3], faces: &[[usize; 3]], radius: Option<&[f64]>) -> Vec<u8> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\nproperty float x\nproperty float y\nproperty float z\n", vertices.len());
    if radius.is_some() {
        header += "property float radius\n";
    }
    if !faces.is_empty() {
        header += &format!("element face {}\nproperty list uchar int vertex_indices\n", faces.len());
    }
    header += "end_header\n";
    let mut out = header.into_bytes();
    for (i, v) in vertices.iter().enumerate() {
        for c in v {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        if let Some(r) = radius {
            out.extend_from_slice(&(r[i] as f32).to_le_bytes());
        }
    }
    for f in faces {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}
