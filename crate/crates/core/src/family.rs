//! Update families: parsing, validation, serialization and the builtin catalog.
//!
//! An update family is a finite list of rules; each rule is a finite set of
//! non-zero lattice offsets. A site `x` becomes infected once `X + x` is
//! entirely infected for some rule `X`.
//!
//! The text format is line based:
//!
//! ```text
//! # Duarte model
//! name: duarte
//! rule: -1,0 0,1
//! rule: -1,0 0,-1
//! rule: 0,1 0,-1
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported |dx| or |dy| of any rule offset.
pub const MAX_RULE_RADIUS: i32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FamilyError {
    #[error("line {line}: malformed line: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: offset at origin")]
    OriginOffset { line: usize },
    #[error("line {line}: empty rule")]
    EmptyRule { line: usize },
    #[error("line {line}: duplicate offset {offset} in rule")]
    DuplicateOffset { line: usize, offset: Offset },
    #[error("line {line}: duplicate rule")]
    DuplicateRule { line: usize },
    #[error("line {line}: offset {offset} exceeds maximum radius {MAX_RULE_RADIUS}")]
    RadiusTooLarge { line: usize, offset: Offset },
    #[error("family has no rules")]
    NoRules,
    #[error("unknown builtin family '{name}' (available: {})", BUILTIN_NAMES.join(", "))]
    UnknownBuiltin { name: String },
}

/// A non-zero lattice displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Offset {
    pub dx: i32,
    pub dy: i32,
}

impl Offset {
    pub const fn new(dx: i32, dy: i32) -> Self {
        Offset { dx, dy }
    }

    pub fn is_origin(self) -> bool {
        self.dx == 0 && self.dy == 0
    }

    pub fn radius(self) -> i32 {
        self.dx.abs().max(self.dy.abs())
    }

    pub fn negated(self) -> Self {
        Offset::new(-self.dx, -self.dy)
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.dx, self.dy)
    }
}

/// A single update rule: a non-empty set of offsets, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    sites: Vec<Offset>,
}

impl Rule {
    /// Builds a rule, sorting the offsets. Fails on empty input, the origin,
    /// duplicates, or offsets beyond [`MAX_RULE_RADIUS`].
    pub fn new(sites: impl IntoIterator<Item = Offset>) -> Result<Self, FamilyError> {
        Self::with_line(sites, 0)
    }

    fn with_line(sites: impl IntoIterator<Item = Offset>, line: usize) -> Result<Self, FamilyError> {
        let mut sites: Vec<Offset> = sites.into_iter().collect();
        if sites.is_empty() {
            return Err(FamilyError::EmptyRule { line });
        }
        for &o in &sites {
            if o.is_origin() {
                return Err(FamilyError::OriginOffset { line });
            }
            if o.radius() > MAX_RULE_RADIUS {
                return Err(FamilyError::RadiusTooLarge { line, offset: o });
            }
        }
        sites.sort();
        if let Some(w) = sites.windows(2).find(|w| w[0] == w[1]) {
            return Err(FamilyError::DuplicateOffset { line, offset: w[0] });
        }
        Ok(Rule { sites })
    }

    pub fn sites(&self) -> &[Offset] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn radius(&self) -> i32 {
        self.sites.iter().map(|o| o.radius()).max().unwrap_or(0)
    }

    pub fn negated(&self) -> Rule {
        let mut sites: Vec<Offset> = self.sites.iter().map(|o| o.negated()).collect();
        sites.sort();
        Rule { sites }
    }
}

/// A validated update family. Rules are stored in canonical (sorted) order so
/// that equality and serialization do not depend on input order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UpdateFamily {
    name: String,
    rules: Vec<Rule>,
}

impl UpdateFamily {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Result<Self, FamilyError> {
        Self::build(name.into(), rules.into_iter().map(|r| (0, r)).collect())
    }

    fn build(name: String, rules: Vec<(usize, Rule)>) -> Result<Self, FamilyError> {
        if rules.is_empty() {
            return Err(FamilyError::NoRules);
        }
        let mut sorted = rules;
        sorted.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        for w in sorted.windows(2) {
            if w[0].1 == w[1].1 {
                return Err(FamilyError::DuplicateRule { line: w[0].0.max(w[1].0) });
            }
        }
        Ok(UpdateFamily { name, rules: sorted.into_iter().map(|(_, r)| r).collect() })
    }

    /// Convenience constructor from raw coordinate lists; panics on invalid
    /// input, so it is meant for literals in tests and examples.
    pub fn from_offsets(name: &str, rules: &[&[(i32, i32)]]) -> Self {
        let rules = rules
            .iter()
            .map(|r| Rule::new(r.iter().map(|&(dx, dy)| Offset::new(dx, dy))).expect("valid rule"))
            .collect();
        UpdateFamily::new(name, rules).expect("valid family")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Chebyshev radius: the largest |dx| or |dy| over all offsets.
    pub fn radius(&self) -> i32 {
        self.rules.iter().map(|r| r.radius()).max().unwrap_or(0)
    }

    /// All distinct offsets used by any rule, sorted.
    pub fn offsets(&self) -> Vec<Offset> {
        let mut all: Vec<Offset> = self.rules.iter().flat_map(|r| r.sites().iter().copied()).collect();
        all.sort();
        all.dedup();
        all
    }

    /// The point reflection of the family through the origin.
    pub fn negated(&self) -> UpdateFamily {
        let rules = self.rules.iter().map(|r| r.negated()).collect();
        UpdateFamily::new(format!("{}-negated", self.name), rules).expect("negation preserves validity")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("name: {}\n", self.name);
        for rule in &self.rules {
            out.push_str("rule:");
            for o in rule.sites() {
                out.push_str(&format!(" {o}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for UpdateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Parses the family file format. Line numbers in errors are 1-based.
pub fn parse_family(text: &str) -> Result<UpdateFamily, FamilyError> {
    let mut name: Option<String> = None;
    let mut rules = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once(':') else {
            return Err(FamilyError::Malformed { line, reason: format!("expected 'key: value', got '{content}'") });
        };
        match key.trim() {
            "name" => {
                if name.is_some() || !rules.is_empty() {
                    return Err(FamilyError::Malformed { line, reason: "name must be the first entry".into() });
                }
                let value = value.trim();
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(FamilyError::Malformed { line, reason: format!("invalid name '{value}'") });
                }
                name = Some(value.to_string());
            }
            "rule" => {
                let offsets = value
                    .split_whitespace()
                    .map(|tok| parse_offset(tok, line))
                    .collect::<Result<Vec<_>, _>>()?;
                rules.push((line, Rule::with_line(offsets, line)?));
            }
            other => {
                return Err(FamilyError::Malformed { line, reason: format!("unknown key '{other}'") });
            }
        }
    }
    UpdateFamily::build(name.unwrap_or_else(|| "unnamed".into()), rules)
}

fn parse_offset(tok: &str, line: usize) -> Result<Offset, FamilyError> {
    let malformed = || FamilyError::Malformed { line, reason: format!("bad offset '{tok}', expected 'dx,dy'") };
    let (a, b) = tok.split_once(',').ok_or_else(malformed)?;
    let dx = a.trim().parse::<i32>().map_err(|_| malformed())?;
    let dy = b.trim().parse::<i32>().map_err(|_| malformed())?;
    Ok(Offset::new(dx, dy))
}

pub const BUILTIN_NAMES: &[&str] = &["east1d-embedded", "east2d", "fa1f", "fa2f", "duarte", "anisotropic"];

/// Looks up a cataloged family by name.
pub fn builtin(name: &str) -> Result<UpdateFamily, FamilyError> {
    const NEIGHBOURS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let fam = match name {
        "east1d-embedded" => UpdateFamily::from_offsets(name, &[&[(-1, 0)]]),
        "east2d" => UpdateFamily::from_offsets(name, &[&[(-1, 0)], &[(0, -1)]]),
        "fa1f" => {
            let rules: Vec<&[(i32, i32)]> = NEIGHBOURS.iter().map(std::slice::from_ref).collect();
            UpdateFamily::from_offsets(name, &rules)
        }
        "fa2f" => subsets_family(name, &NEIGHBOURS, 2),
        "duarte" => UpdateFamily::from_offsets(name, &[&[(-1, 0), (0, 1)], &[(-1, 0), (0, -1)], &[(0, 1), (0, -1)]]),
        "anisotropic" => subsets_family(name, &[(-2, 0), (-1, 0), (1, 0), (2, 0), (0, 1), (0, -1)], 3),
        _ => return Err(FamilyError::UnknownBuiltin { name: name.to_string() }),
    };
    Ok(fam)
}

fn subsets_family(name: &str, ground: &[(i32, i32)], k: usize) -> UpdateFamily {
    let n = ground.len();
    let mut rules = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let sites = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| Offset::new(ground[i].0, ground[i].1));
            rules.push(Rule::new(sites).expect("distinct non-zero offsets"));
        }
    }
    UpdateFamily::new(name, rules).expect("distinct subsets")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_family() {
        let f = parse_family("rule: -1,0").unwrap();
        assert_eq!(f.rules().len(), 1);
        assert_eq!(f.rules()[0].sites(), &[Offset::new(-1, 0)]);
    }

    #[test]
    fn duarte_file_parses() {
        let text = "# Duarte\nname: duarte\nrule: -1,0 0,1\nrule: -1,0   0,-1  # west + south\n\nrule: 0,1 0,-1\n";
        let f = parse_family(text).unwrap();
        assert_eq!(f.rules().len(), 3);
        assert!(f.rules().iter().all(|r| r.len() == 2));
        assert_eq!(f, builtin("duarte").unwrap());
    }

    #[test]
    fn origin_rejected() {
        let err = parse_family("rule: 0,0").unwrap_err();
        assert_eq!(err, FamilyError::OriginOffset { line: 1 });
        assert!(err.to_string().contains("offset at origin"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(parse_family("name: x\nrule:\n").unwrap_err(), FamilyError::EmptyRule { line: 2 });
        assert!(matches!(parse_family("rule: 1;0").unwrap_err(), FamilyError::Malformed { line: 1, .. }));
        assert!(matches!(parse_family("rules: 1,0").unwrap_err(), FamilyError::Malformed { line: 1, .. }));
        assert_eq!(
            parse_family("rule: 1,0 0,1\n# c\nrule: 0,1 1,0").unwrap_err(),
            FamilyError::DuplicateRule { line: 3 }
        );
        assert!(matches!(parse_family("rule: 1,0 1,0").unwrap_err(), FamilyError::DuplicateOffset { .. }));
        assert!(matches!(parse_family("rule: 65,0").unwrap_err(), FamilyError::RadiusTooLarge { .. }));
        assert_eq!(parse_family("# nothing\n").unwrap_err(), FamilyError::NoRules);
    }

    #[test]
    fn builtin_sizes() {
        let d = builtin("duarte").unwrap();
        assert_eq!(d.rules().len(), 3);
        assert!(d.rules().iter().all(|r| r.len() == 2));
        let f2 = builtin("fa2f").unwrap();
        assert_eq!(f2.rules().len(), 6);
        assert!(f2.rules().iter().all(|r| r.len() == 2));
        let an = builtin("anisotropic").unwrap();
        assert_eq!(an.rules().len(), 20);
        assert!(an.rules().iter().all(|r| r.len() == 3));
        assert_eq!(builtin("east2d").unwrap(), UpdateFamily::from_offsets("east2d", &[&[(0, -1)], &[(-1, 0)]]));
        assert_eq!(builtin("fa1f").unwrap().rules().len(), 4);
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let msg = builtin("life").unwrap_err().to_string();
        for n in BUILTIN_NAMES {
            assert!(msg.contains(n), "{msg}");
        }
    }

    #[test]
    fn builtins_round_trip() {
        for n in BUILTIN_NAMES {
            let f = builtin(n).unwrap();
            assert_eq!(parse_family(&f.to_text()).unwrap(), f);
        }
    }

    fn arb_family() -> impl Strategy<Value = UpdateFamily> {
        let offset = (-3i32..=3, -3i32..=3).prop_filter("non-origin", |&(x, y)| (x, y) != (0, 0));
        let rule = proptest::collection::btree_set(offset, 1..5);
        proptest::collection::btree_set(rule, 1..5).prop_map(|rules| {
            let rules = rules
                .into_iter()
                .map(|r| Rule::new(r.into_iter().map(|(x, y)| Offset::new(x, y))).unwrap())
                .collect();
            UpdateFamily::new("random", rules).unwrap()
        })
    }

    proptest! {
        #[test]
        fn text_round_trip(f in arb_family()) {
            prop_assert_eq!(parse_family(&f.to_text()).unwrap(), f);
        }
    }
}
