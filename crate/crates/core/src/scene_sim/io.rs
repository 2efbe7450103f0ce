//! Plain-text scene files.
//!
//! One primitive per line, `shape class instance params...`:
//!
//! ```text
//! # plant_base 0.7 0 0.45
//! cylinder -1 1 ax ay az bx by bz radius
//! sphere 2 7 cx cy cz radius
//! disc -1 9 cx cy cz nx ny nz radius
//! ```
//!
//! Ground-truth files hold `class x y z` per object of interest.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::semantic_map::SemanticClass;

use super::{LabeledPrimitive, LabeledScene, Shape};

pub fn write_scene<W: Write>(scene: &LabeledScene, mut out: W) -> Result<()> {
    let b = scene.plant_base();
    writeln!(out, "# plant_base {} {} {}", b.x, b.y, b.z)?;
    for p in scene.primitives() {
        let c = p.class.as_i8();
        match p.shape {
            Shape::Cylinder { a, b, radius } => writeln!(
                out,
                "cylinder {c} {} {} {} {} {} {} {} {radius}",
                p.instance, a.x, a.y, a.z, b.x, b.y, b.z
            )?,
            Shape::Sphere { center, radius } => writeln!(
                out,
                "sphere {c} {} {} {} {} {radius}",
                p.instance, center.x, center.y, center.z
            )?,
            Shape::Disc { center, normal, radius } => writeln!(
                out,
                "disc {c} {} {} {} {} {} {} {} {radius}",
                p.instance, center.x, center.y, center.z, normal.x, normal.y, normal.z
            )?,
        }
    }
    Ok(())
}

fn parse_class(field: &str, line: usize) -> Result<SemanticClass> {
    field
        .parse::<i8>()
        .ok()
        .and_then(SemanticClass::from_i8)
        .ok_or_else(|| Error::parse(line, format!("unknown class `{field}`")))
}

fn parse_numbers(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|e| Error::parse(line, format!("`{f}`: {e}"))))
        .collect()
}

pub fn read_scene<R: BufRead>(input: R) -> Result<LabeledScene> {
    let mut prims = Vec::new();
    let mut base = Vec3::zeros();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            ["#", "plant_base", rest @ ..] => {
                let v = parse_numbers(rest, n)?;
                if v.len() != 3 {
                    return Err(Error::parse(n, "plant_base needs three coordinates"));
                }
                base = Vec3::new(v[0], v[1], v[2]);
            }
            [first, ..] if first.starts_with('#') => continue,
            [kind, class, instance, rest @ ..] => {
                let class = parse_class(class, n)?;
                let instance = instance
                    .parse::<u32>()
                    .map_err(|e| Error::parse(n, format!("instance: {e}")))?;
                let v = parse_numbers(rest, n)?;
                let shape = match (*kind, v.len()) {
                    ("cylinder", 7) => Shape::Cylinder {
                        a: Vec3::new(v[0], v[1], v[2]),
                        b: Vec3::new(v[3], v[4], v[5]),
                        radius: v[6],
                    },
                    ("sphere", 4) => Shape::Sphere {
                        center: Vec3::new(v[0], v[1], v[2]),
                        radius: v[3],
                    },
                    ("disc", 7) => Shape::Disc {
                        center: Vec3::new(v[0], v[1], v[2]),
                        normal: Vec3::new(v[3], v[4], v[5]),
                        radius: v[6],
                    },
                    _ => return Err(Error::parse(n, format!("bad `{kind}` record"))),
                };
                prims.push(LabeledPrimitive { shape, class, instance });
            }
            _ => return Err(Error::parse(n, "expected `shape class instance params...`")),
        }
    }
    LabeledScene::new(prims, base)
}

pub fn write_ground_truth<W: Write>(scene: &LabeledScene, mut out: W) -> Result<()> {
    for t in scene.ooi() {
        writeln!(out, "{} {} {} {}", t.class.as_i8(), t.center.x, t.center.y, t.center.z)?;
    }
    Ok(())
}

pub fn read_ground_truth<R: BufRead>(input: R) -> Result<Vec<(SemanticClass, Vec3)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || fields[0].starts_with('#') {
            continue;
        }
        if fields.len() != 4 {
            return Err(Error::parse(n, "expected `class x y z`"));
        }
        let class = parse_class(fields[0], n)?;
        let v = parse_numbers(&fields[1..], n)?;
        out.push((class, Vec3::new(v[0], v[1], v[2])));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Viewpoint;
    use crate::scene_sim::{generate_plant, PlantParams};

    #[test]
    fn scene_round_trip_is_exact() {
        let scene = generate_plant(8, &PlantParams::default())
            .unwrap()
            .placed(&Viewpoint::from_pan_tilt(Vec3::new(0.7, 0.1, 0.45), 0.3, 0.0));
        let mut buf = Vec::new();
        write_scene(&scene, &mut buf).unwrap();
        let back = read_scene(&buf[..]).unwrap();
        assert_eq!(back, scene);
        assert_eq!(back.ooi(), scene.ooi());

        let mut gt = Vec::new();
        write_ground_truth(&scene, &mut gt).unwrap();
        let centers = read_ground_truth(&gt[..]).unwrap();
        assert_eq!(centers.len(), scene.ooi().len());
        for ((c, p), t) in centers.iter().zip(scene.ooi()) {
            assert_eq!(*c, t.class);
            assert_eq!(*p, t.center);
        }
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let text = "# plant_base 0 0 0\nsphere 2 1 0 0 0 0.01\nsphere 2 2 0 0\n";
        assert!(matches!(read_scene(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_scene("cube 2 1 0 0 0 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_scene("sphere 5 1 0 0 0 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
