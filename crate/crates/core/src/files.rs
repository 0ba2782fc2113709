//! Line-oriented text formats for systems, covers, spaces and
//! decompositions.
//!
//! Serialization is canonical: points, generators and sets are emitted in
//! sorted order, so parse(serialize(x)) is structurally equal to x and
//! files diff cleanly.  Numbers are exact rationals `p/q` or plain
//! integers.
//!
//! System file:
//! ```text
//! points 0 1 2 3
//! group Z
//! genradius 1
//! horizon 4
//! gen (1) 0 1
//! gen (-1) 1 0
//! ```
//!
//! Cover file: optional `ground` line, then one line per set:
//! ```text
//! ground 0 1 2 3
//! family 0 set 0: 0 2
//! family 1 set 0: 1 3
//! ```
//!
//! Space file: a `metric` header (`l1`, `l2`, `linf`, `torus`,
//! `weighted-l1 w1 w2 ...`, or `table`), then `point <id> <coords...>`
//! lines, or `dist <a> <b> <value>` lines for tables.
//!
//! Decomposition file: `params epsilon <p/q> delta <p/q>` then cover-style
//! family lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::Zero;

use crate::error::{Error, Result};
use crate::group::{Element, GroupKind, GroupModel};
use crate::metric::{CoordMetric, Decomposition, FiniteMetricSpace, Geometry, Rat};
use crate::system::{Cover, PartialSystem, Scale};

/// Canonical name of a group element, parseable back in the context of its
/// group.
pub fn element_name(group: &GroupModel, elt: &Element) -> String {
    fn kind_name(kind: &GroupKind, elt: &Element) -> String {
        match (kind, elt) {
            (GroupKind::FreeAbelian(_), Element::Vector(v)) => {
                let inner = v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
                format!("({inner})")
            }
            (GroupKind::Cyclic(_), Element::Residue(r)) => r.to_string(),
            (GroupKind::FreeGroup(_), Element::Word(w)) => {
                if w.is_empty() {
                    return "e".to_string();
                }
                w.iter()
                    .map(|&l| {
                        let letter = (b'a' + (l.unsigned_abs() - 1)) as char;
                        if l > 0 {
                            letter.to_string()
                        } else {
                            letter.to_ascii_uppercase().to_string()
                        }
                    })
                    .collect()
            }
            (GroupKind::Product(parts), Element::Tuple(xs)) => {
                let inner = parts
                    .iter()
                    .zip(xs)
                    .map(|(p, x)| kind_name(p, x))
                    .collect::<Vec<_>>()
                    .join("|");
                format!("[{inner}]")
            }
            _ => panic!("element does not match the group"),
        }
    }
    kind_name(group.kind(), elt)
}

/// Parse a canonical element name in the context of a group.
pub fn parse_element(group: &GroupModel, name: &str) -> Result<Element> {
    fn kind_parse(kind: &GroupKind, name: &str) -> Option<Element> {
        match kind {
            GroupKind::FreeAbelian(d) => {
                let inner = name.strip_prefix('(')?.strip_suffix(')')?;
                let parts: Vec<i64> = if inner.is_empty() {
                    Vec::new()
                } else {
                    inner.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?
                };
                (parts.len() == *d as usize).then_some(Element::Vector(parts))
            }
            GroupKind::Cyclic(n) => {
                let r: u64 = name.parse().ok()?;
                (r < (*n).max(1)).then_some(Element::Residue(r))
            }
            GroupKind::FreeGroup(k) => {
                if name == "e" {
                    return Some(Element::Word(Vec::new()));
                }
                let mut word = Vec::new();
                for ch in name.chars() {
                    let lower = ch.to_ascii_lowercase();
                    if !lower.is_ascii_lowercase() {
                        return None;
                    }
                    let idx = (lower as u8 - b'a') as i8 + 1;
                    if idx as u32 > *k {
                        return None;
                    }
                    word.push(if ch.is_ascii_lowercase() { idx } else { -idx });
                }
                Some(Element::Word(word))
            }
            GroupKind::Product(parts) => {
                let inner = name.strip_prefix('[')?.strip_suffix(']')?;
                let mut fields = Vec::new();
                let mut depth = 0usize;
                let mut start = 0usize;
                for (i, ch) in inner.char_indices() {
                    match ch {
                        '(' | '[' => depth += 1,
                        ')' | ']' => depth = depth.saturating_sub(1),
                        '|' if depth == 0 => {
                            fields.push(&inner[start..i]);
                            start = i + 1;
                        }
                        _ => {}
                    }
                }
                fields.push(&inner[start..]);
                if fields.len() != parts.len() {
                    return None;
                }
                let xs: Option<Vec<Element>> = parts
                    .iter()
                    .zip(&fields)
                    .map(|(p, f)| kind_parse(p, f))
                    .collect();
                Some(Element::Tuple(xs?))
            }
        }
    }
    kind_parse(group.kind(), name)
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("bad element name `{name}`") })
}

fn format_rat(r: &Rat) -> String {
    if r.denom() == &1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p/q` or a plain integer.
pub fn parse_rational(s: &str) -> Result<Rat> {
    parse_rat(s, 0)
}

fn parse_rat(s: &str, line: usize) -> Result<Rat> {
    let parse_int = |t: &str| -> Result<i128> {
        t.trim()
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad number `{t}`") })
    };
    match s.split_once('/') {
        Some((n, d)) => {
            let denom = parse_int(d)?;
            if denom == 0 {
                return Err(Error::Parse { line, msg: "zero denominator".to_string() });
            }
            Ok(Rat::new(parse_int(n)?, denom))
        }
        None => Ok(Rat::from_integer(parse_int(s)?)),
    }
}

/// Canonical text form of a partial system.
pub fn serialize_system(system: &PartialSystem) -> String {
    let mut out = String::new();
    let points = system
        .points()
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "points {points}");
    let _ = writeln!(out, "group {}", system.group());
    let _ = writeln!(out, "genradius {}", system.group().gen_radius());
    match system.horizon() {
        Scale::Finite(h) => {
            let _ = writeln!(out, "horizon {h}");
        }
        Scale::Unbounded => {
            let _ = writeln!(out, "horizon unbounded");
        }
    }
    for (gen, pairs) in system.map_entries() {
        let name = element_name(system.group(), &gen);
        for (src, dst) in pairs {
            let _ = writeln!(out, "gen {name} {src} {dst}");
        }
    }
    out
}

/// Parse the canonical system format.
pub fn parse_system(text: &str) -> Result<PartialSystem> {
    let mut points: Option<Vec<u32>> = None;
    let mut group: Option<GroupModel> = None;
    let mut gen_radius = 1u32;
    let mut horizon: Option<Scale> = None;
    let mut entries: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
    let mut entry_lines: BTreeMap<(String, u32), usize> = BTreeMap::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("points") => {
                let ids: Vec<u32> = tokens
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::Parse { line, msg: format!("bad point id `{t}`") })
                    })
                    .collect::<Result<_>>()?;
                points = Some(ids);
            }
            Some("group") => {
                let spec: Vec<&str> = tokens.collect();
                group = Some(GroupModel::parse(&spec.join(" "))?);
            }
            Some("genradius") => {
                let t = tokens
                    .next()
                    .ok_or_else(|| Error::Parse { line, msg: "missing radius".into() })?;
                gen_radius = t
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("bad radius `{t}`") })?;
                if gen_radius == 0 {
                    return Err(Error::Parse { line, msg: "genradius must be positive".into() });
                }
            }
            Some("horizon") => {
                let t = tokens
                    .next()
                    .ok_or_else(|| Error::Parse { line, msg: "missing horizon".into() })?;
                horizon = Some(if t == "unbounded" {
                    Scale::Unbounded
                } else {
                    Scale::Finite(t.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad horizon `{t}`"),
                    })?)
                });
            }
            Some("gen") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| Error::Parse { line, msg: "missing generator".into() })?;
                let src: u32 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "missing source point".into() })?;
                let dst: u32 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "missing image point".into() })?;
                let key = (name.to_string(), src);
                if let Some(prev) = entry_lines.get(&key) {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "duplicate map entry for generator {name} at point {src} (first at line {prev})"
                        ),
                    });
                }
                entry_lines.insert(key, line);
                entries.entry(name.to_string()).or_default().push((src, dst));
            }
            Some(other) => {
                return Err(Error::Parse { line, msg: format!("unknown directive `{other}`") })
            }
            None => unreachable!(),
        }
    }

    let points = points.ok_or_else(|| Error::Parse { line: 0, msg: "missing points line".into() })?;
    let base = group.ok_or_else(|| Error::Parse { line: 0, msg: "missing group line".into() })?;
    let group = if gen_radius == 1 { base } else { base.rescaled(gen_radius) };
    let mut named: BTreeMap<Element, Vec<(u32, u32)>> = BTreeMap::new();
    for (name, pairs) in entries {
        let elt = parse_element(&group, &name)?;
        if elt == group.identity() {
            return Err(Error::Parse {
                line: 0,
                msg: "identity maps are implicit and may not be listed".into(),
            });
        }
        named.insert(elt, pairs);
    }
    let mut system = PartialSystem::from_maps(group, points, &named)?;
    if let Some(Scale::Unbounded) = horizon {
        system.assume_unbounded_horizon();
    } else if let Some(Scale::Finite(h)) = horizon {
        if h > 0 {
            let report = system.validate(h);
            if !report.is_valid() {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!(
                        "file claims horizon {h} but validation finds {:?}",
                        report.violations[0]
                    ),
                });
            }
        }
    }
    Ok(system)
}

/// Canonical text form of a cover.
pub fn serialize_cover(cover: &Cover) -> String {
    let mut out = String::new();
    let ground = cover
        .ground
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(out, "ground {ground}");
    let _ = writeln!(out, "families {}", cover.families.len());
    for (f, sets) in cover.families.iter().enumerate() {
        for (s, set) in sets.iter().enumerate() {
            let members = set.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "family {f} set {s}: {members}");
        }
    }
    out
}

/// Parse the canonical cover format.
pub fn parse_cover(text: &str) -> Result<Cover> {
    let mut ground = std::collections::BTreeSet::new();
    let mut families: Vec<Vec<std::collections::BTreeSet<u32>>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("ground") {
            for t in rest.split_whitespace() {
                ground.insert(t.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad point id `{t}`"),
                })?);
            }
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("families") {
            let count: usize = rest.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad family count `{rest}`"),
            })?;
            while families.len() < count {
                families.push(Vec::new());
            }
            continue;
        }
        let rest = trimmed
            .strip_prefix("family")
            .ok_or_else(|| Error::Parse { line, msg: "expected `family` line".into() })?;
        let (head, members) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse { line, msg: "missing `:`".into() })?;
        let mut head_tokens = head.split_whitespace();
        let family: usize = head_tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse { line, msg: "missing family index".into() })?;
        match (head_tokens.next(), head_tokens.next()) {
            (Some("set"), Some(_)) => {}
            _ => return Err(Error::Parse { line, msg: "expected `set <index>`".into() }),
        }
        let set: std::collections::BTreeSet<u32> = members
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse { line, msg: format!("bad point id `{t}`") })
            })
            .collect::<Result<_>>()?;
        while families.len() <= family {
            families.push(Vec::new());
        }
        families[family].push(set);
    }
    Ok(Cover { ground, families })
}

/// Canonical text form of a finite metric space.
pub fn serialize_space(space: &FiniteMetricSpace) -> String {
    let mut out = String::new();
    match space.geometry() {
        Geometry::Coords { metric, coords } => {
            let tag = match metric {
                CoordMetric::L1 => "l1".to_string(),
                CoordMetric::L2 => "l2".to_string(),
                CoordMetric::Linf => "linf".to_string(),
                CoordMetric::Torus => "torus".to_string(),
                CoordMetric::WeightedL1(ws) => {
                    let ws = ws.iter().map(format_rat).collect::<Vec<_>>().join(" ");
                    format!("weighted-l1 {ws}")
                }
            };
            let _ = writeln!(out, "metric {tag}");
            for (id, coord) in space.ids().iter().zip(coords) {
                let cs = coord.iter().map(format_rat).collect::<Vec<_>>().join(" ");
                let _ = writeln!(out, "point {id} {cs}");
            }
        }
        Geometry::Table(table) => {
            let _ = writeln!(out, "metric table");
            let ids = space.ids();
            for id in ids {
                let _ = writeln!(out, "point {id}");
            }
            for (i, row) in table.iter().enumerate() {
                for (j, value) in row.iter().enumerate().skip(i + 1) {
                    let _ = writeln!(out, "dist {} {} {}", ids[i], ids[j], format_rat(value));
                }
            }
        }
    }
    out
}

/// Parse the canonical space format.
pub fn parse_space(text: &str) -> Result<FiniteMetricSpace> {
    let mut metric: Option<String> = None;
    let mut ids = Vec::new();
    let mut coords: Vec<Vec<Rat>> = Vec::new();
    let mut dists: Vec<(u32, u32, Rat)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("metric") => {
                let rest: Vec<&str> = tokens.collect();
                metric = Some(rest.join(" "));
            }
            Some("point") => {
                let id: u32 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "missing point id".into() })?;
                ids.push(id);
                let cs: Vec<Rat> = tokens
                    .map(|t| parse_rat(t, line))
                    .collect::<Result<_>>()?;
                coords.push(cs);
            }
            Some("dist") => {
                let a: u32 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "missing id".into() })?;
                let b: u32 = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse { line, msg: "missing id".into() })?;
                let v = tokens
                    .next()
                    .ok_or_else(|| Error::Parse { line, msg: "missing distance".into() })?;
                dists.push((a, b, parse_rat(v, line)?));
            }
            Some(other) => {
                return Err(Error::Parse { line, msg: format!("unknown directive `{other}`") })
            }
            None => unreachable!(),
        }
    }
    let metric = metric.ok_or_else(|| Error::Parse { line: 0, msg: "missing metric line".into() })?;
    if metric == "table" {
        let n = ids.len();
        let index: BTreeMap<u32, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut table = vec![vec![Rat::zero(); n]; n];
        for (a, b, v) in dists {
            let i = *index
                .get(&a)
                .ok_or(Error::UnknownPoint(a))?;
            let j = *index
                .get(&b)
                .ok_or(Error::UnknownPoint(b))?;
            table[i][j] = v;
            table[j][i] = v;
        }
        FiniteMetricSpace::from_table(ids, table)
    } else {
        let mut tokens = metric.split_whitespace();
        let kind = match tokens.next() {
            Some("l1") => CoordMetric::L1,
            Some("l2") => CoordMetric::L2,
            Some("linf") => CoordMetric::Linf,
            Some("torus") => CoordMetric::Torus,
            Some("weighted-l1") => {
                let ws: Vec<Rat> = tokens
                    .map(|t| parse_rat(t, 0))
                    .collect::<Result<_>>()?;
                CoordMetric::WeightedL1(ws)
            }
            other => {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("unknown metric `{other:?}`"),
                })
            }
        };
        FiniteMetricSpace::from_coords(ids, kind, coords)
    }
}

/// Canonical text form of a decomposition.
pub fn serialize_decomposition(dec: &Decomposition) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "params epsilon {} delta {}",
        format_rat(&dec.epsilon),
        format_rat(&dec.delta)
    );
    for (f, sets) in dec.families.iter().enumerate() {
        for (s, set) in sets.iter().enumerate() {
            let members = set.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "family {f} set {s}: {members}");
        }
    }
    out
}

/// Parse the canonical decomposition format.
pub fn parse_decomposition(text: &str) -> Result<Decomposition> {
    let mut epsilon = None;
    let mut delta = None;
    let mut body = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("params") {
            let tokens: Vec<&str> = rest.split_whitespace().collect();
            let mut i = 0;
            while i + 1 < tokens.len() {
                match tokens[i] {
                    "epsilon" => epsilon = Some(parse_rat(tokens[i + 1], line)?),
                    "delta" => delta = Some(parse_rat(tokens[i + 1], line)?),
                    other => {
                        return Err(Error::Parse {
                            line,
                            msg: format!("unknown parameter `{other}`"),
                        })
                    }
                }
                i += 2;
            }
        } else {
            body.push_str(raw);
            body.push('\n');
        }
    }
    let epsilon =
        epsilon.ok_or_else(|| Error::Parse { line: 0, msg: "missing epsilon".into() })?;
    let delta = delta.ok_or_else(|| Error::Parse { line: 0, msg: "missing delta".into() })?;
    let cover = parse_cover(&body)?;
    Ok(Decomposition { families: cover.families, epsilon, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::rat;
    use std::collections::BTreeSet;

    #[test]
    fn system_round_trip() {
        let system = PartialSystem::translation_cycle(10);
        let text = serialize_system(&system);
        let parsed = parse_system(&text).unwrap();
        assert_eq!(system, parsed);
        assert_eq!(serialize_system(&parsed), text);
    }

    #[test]
    fn duplicate_entry_is_a_parse_error() {
        let text = "points 3 4\ngroup Z\nhorizon 0\ngen (1) 3 3\ngen (1) 3 4\n";
        match parse_system(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("duplicate"), "{msg}");
            }
            other => panic!("expected a duplicate-entry parse error, got {other:?}"),
        }
    }

    #[test]
    fn claimed_horizon_is_checked() {
        // a map that is not injective cannot validate
        let text = "points 0 1 2\ngroup Z\nhorizon 1\ngen (1) 0 2\ngen (1) 1 2\n";
        match parse_system(text) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("duplicate") || msg.contains("validation")),
            other => panic!("expected an error, got {other:?}"),
        }
    }

    #[test]
    fn cover_round_trip() {
        let evens: BTreeSet<u32> = [0, 2, 4].into_iter().collect();
        let odds: BTreeSet<u32> = [1, 3].into_iter().collect();
        let cover = Cover {
            ground: (0..5).collect(),
            families: vec![vec![evens], vec![odds]],
        };
        let text = serialize_cover(&cover);
        let parsed = parse_cover(&text).unwrap();
        assert_eq!(cover, parsed);
    }

    #[test]
    fn space_round_trips() {
        let coords: Vec<Vec<Rat>> = vec![vec![rat(0, 1), rat(1, 3)], vec![rat(1, 2), rat(2, 3)]];
        let space =
            FiniteMetricSpace::from_coords(vec![5, 9], CoordMetric::L2, coords).unwrap();
        let text = serialize_space(&space);
        let parsed = parse_space(&text).unwrap();
        assert_eq!(space, parsed);

        let table = vec![
            vec![rat(0, 1), rat(1, 2)],
            vec![rat(1, 2), rat(0, 1)],
        ];
        let space = FiniteMetricSpace::from_table(vec![0, 1], table).unwrap();
        let text = serialize_space(&space);
        let parsed = parse_space(&text).unwrap();
        assert_eq!(space, parsed);
    }

    #[test]
    fn decomposition_round_trip() {
        let dec = Decomposition {
            families: vec![
                vec![[0u32, 1].into_iter().collect()],
                vec![[2u32].into_iter().collect()],
            ],
            epsilon: rat(1, 20),
            delta: rat(3, 4),
        };
        let text = serialize_decomposition(&dec);
        let parsed = parse_decomposition(&text).unwrap();
        assert_eq!(dec, parsed);
    }

    #[test]
    fn element_names_round_trip() {
        let groups = [
            GroupModel::free_abelian(2),
            GroupModel::cyclic(10),
            GroupModel::free_group(2),
            GroupModel::product(vec![GroupKind::Cyclic(4), GroupKind::FreeAbelian(1)]),
        ];
        for group in groups {
            let ball = group.word_ball(2, &crate::caps::Caps::default()).unwrap();
            for elt in &ball.elements {
                let name = element_name(&group, elt);
                let back = parse_element(&group, &name).unwrap();
                assert_eq!(*elt, back, "in group {group}");
            }
        }
    }
}
