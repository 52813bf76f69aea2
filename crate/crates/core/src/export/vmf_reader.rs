//! Minimal VMF reader used to check exported maps structurally.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VmfError {
    #[error("syntax error at byte {0}: {1}")]
    Syntax(usize, String),
    #[error("structure error: {0}")]
    Structure(String),
}

/// One `name { ... }` block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Block {
    pub name: String,
    pub props: Vec<(String, String)>,
    pub children: Vec<Block>,
}

impl Block {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.props.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Block> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Str(String),
    Word(String),
    Open,
    Close,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, VmfError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'{' => {
                out.push((i, Token::Open));
                i += 1;
            }
            b'}' => {
                out.push((i, Token::Close));
                i += 1;
            }
            b'"' => {
                let start = i + 1;
                let end = text[start..]
                    .find('"')
                    .map(|k| start + k)
                    .ok_or_else(|| VmfError::Syntax(i, "unterminated string".into()))?;
                out.push((i, Token::Str(text[start..end].to_string())));
                i = end + 1;
            }
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'{' | b'}' | b'"') {
                    i += 1;
                }
                out.push((start, Token::Word(text[start..i].to_string())));
            }
        }
    }
    Ok(out)
}

/// Parses the top-level blocks of a VMF document.
pub fn parse(text: &str) -> Result<Vec<Block>, VmfError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<Block> = vec![Block::default()];
    let mut k = 0;
    while k < tokens.len() {
        let (pos, ref t) = tokens[k];
        match t {
            Token::Word(name) | Token::Str(name) => match tokens.get(k + 1) {
                Some((_, Token::Open)) => {
                    stack.push(Block { name: name.clone(), ..Block::default() });
                    k += 2;
                }
                Some((_, Token::Str(v))) => {
                    stack.last_mut().expect("root").props.push((name.clone(), v.clone()));
                    k += 2;
                }
                _ => return Err(VmfError::Syntax(pos, format!("dangling key {name:?}"))),
            },
            Token::Close => {
                if stack.len() < 2 {
                    return Err(VmfError::Syntax(pos, "unbalanced '}'".into()));
                }
                let b = stack.pop().expect("checked");
                stack.last_mut().expect("root").children.push(b);
                k += 1;
            }
            Token::Open => return Err(VmfError::Syntax(pos, "block without a name".into())),
        }
    }
    if stack.len() != 1 {
        return Err(VmfError::Syntax(text.len(), "unclosed block".into()));
    }
    let root = stack.pop().expect("root");
    if !root.props.is_empty() {
        return Err(VmfError::Structure("key/value pair outside any block".into()));
    }
    Ok(root.children)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolidInfo {
    pub id: u64,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityInfo {
    pub id: u64,
    pub classname: String,
    pub targetname: String,
    pub origin: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmfSummary {
    pub solids: Vec<SolidInfo>,
    pub entities: Vec<EntityInfo>,
}

fn parse_point(s: &str) -> Option<[f64; 3]> {
    let v: Vec<f64> = s.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
    (v.len() == 3).then(|| [v[0], v[1], v[2]])
}

fn parse_plane(s: &str) -> Option<[[f64; 3]; 3]> {
    let parts: Vec<&str> = s.split(['(', ')']).map(str::trim).filter(|p| !p.is_empty()).collect();
    if parts.len() != 3 {
        return None;
    }
    Some([parse_point(parts[0])?, parse_point(parts[1])?, parse_point(parts[2])?])
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn id_of(b: &Block, ids: &mut BTreeSet<u64>) -> Result<u64, VmfError> {
    let id: u64 = b
        .get("id")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| VmfError::Structure(format!("{} without a numeric id", b.name)))?;
    if !ids.insert(id) {
        return Err(VmfError::Structure(format!("duplicate id {id}")));
    }
    Ok(id)
}

/// Checks that a solid is a closed axis-aligned box whose planes all face
/// outward, and returns its extents.
fn check_solid(b: &Block, ids: &mut BTreeSet<u64>) -> Result<SolidInfo, VmfError> {
    let id = id_of(b, ids)?;
    let sides: Vec<&Block> = b.children_named("side").collect();
    if sides.len() != 6 {
        return Err(VmfError::Structure(format!("solid {id} has {} sides", sides.len())));
    }
    // Per axis and sign, the plane offset along that axis.
    let mut faces: [[Option<f64>; 2]; 3] = [[None; 2]; 3];
    for s in sides {
        id_of(s, ids)?;
        let p = s
            .get("plane")
            .and_then(parse_plane)
            .ok_or_else(|| VmfError::Structure(format!("solid {id} has a malformed plane")))?;
        let n = cross(sub(p[0], p[1]), sub(p[2], p[1]));
        let axis = (0..3)
            .find(|&a| n[a] != 0.0 && (0..3).all(|o| o == a || n[o] == 0.0))
            .ok_or_else(|| VmfError::Structure(format!("solid {id} has a non-axis plane")))?;
        let sign = usize::from(n[axis] > 0.0);
        if faces[axis][sign].replace(p[0][axis]).is_some() {
            return Err(VmfError::Structure(format!("solid {id} repeats a face")));
        }
    }
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for a in 0..3 {
        let (lo, hi) = (faces[a][0].expect("six distinct faces"), faces[a][1].expect("six distinct faces"));
        // An outward-facing pair has the negative face below the positive one.
        if lo >= hi {
            return Err(VmfError::Structure(format!("solid {id} is inside out or flat along axis {a}")));
        }
        min[a] = lo;
        max[a] = hi;
    }
    Ok(SolidInfo { id, min, max })
}

/// Parses and validates a map: one `versioninfo`, one `world` of class
/// `worldspawn`, closed box solids, point entities with ids and origins.
pub fn read_vmf(text: &str) -> Result<VmfSummary, VmfError> {
    let blocks = parse(text)?;
    let count = |n: &str| blocks.iter().filter(|b| b.name == n).count();
    if count("versioninfo") != 1 {
        return Err(VmfError::Structure("expected exactly one versioninfo".into()));
    }
    if count("world") != 1 {
        return Err(VmfError::Structure("expected exactly one world".into()));
    }
    let mut ids = BTreeSet::new();
    let world = blocks.iter().find(|b| b.name == "world").expect("counted");
    if world.get("classname") != Some("worldspawn") {
        return Err(VmfError::Structure("world is not a worldspawn".into()));
    }
    id_of(world, &mut ids)?;
    let solids = world.children_named("solid").map(|s| check_solid(s, &mut ids)).collect::<Result<_, _>>()?;
    let mut entities = Vec::new();
    for e in blocks.iter().filter(|b| b.name == "entity") {
        let id = id_of(e, &mut ids)?;
        let get = |k: &str| e.get(k).ok_or_else(|| VmfError::Structure(format!("entity {id} lacks {k}")));
        let origin = parse_point(get("origin")?).ok_or_else(|| VmfError::Structure(format!("entity {id} origin")))?;
        entities.push(EntityInfo { id, classname: get("classname")?.into(), targetname: get("targetname")?.into(), origin });
    }
    Ok(VmfSummary { solids, entities })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = r#"
versioninfo { "formatversion" "100" }
world
{
    "id" "1"
    "classname" "worldspawn"
    solid
    {
        "id" "2"
        side { "id" "3" "plane" "(-64 64 64) (64 64 64) (64 -64 64)" }
        side { "id" "4" "plane" "(-64 -64 -64) (64 -64 -64) (64 64 -64)" }
        side { "id" "5" "plane" "(-64 64 64) (-64 -64 64) (-64 -64 -64)" }
        side { "id" "6" "plane" "(64 64 -64) (64 -64 -64) (64 -64 64)" }
        side { "id" "7" "plane" "(64 64 64) (-64 64 64) (-64 64 -64)" }
        side { "id" "8" "plane" "(64 -64 -64) (-64 -64 -64) (-64 -64 64)" }
    }
}
entity { "id" "9" "classname" "prop_dynamic" "targetname" "crate" "origin" "0 0 0" }
"#;

    #[test]
    fn reads_hammer_cube() {
        let s = read_vmf(CUBE).unwrap();
        assert_eq!(s.solids, vec![SolidInfo { id: 2, min: [-64.0; 3], max: [64.0; 3] }]);
        assert_eq!(s.entities[0].targetname, "crate");
    }

    #[test]
    fn rejects_inward_planes_and_duplicates() {
        let flipped = CUBE.replace("(-64 64 64) (64 64 64) (64 -64 64)", "(64 -64 64) (64 64 64) (-64 64 64)");
        assert!(read_vmf(&flipped).is_err());
        let dup = CUBE.replace("\"id\" \"9\"", "\"id\" \"2\"");
        assert!(matches!(read_vmf(&dup), Err(VmfError::Structure(_))));
        assert!(matches!(read_vmf("world {"), Err(VmfError::Syntax(..))));
    }
}
