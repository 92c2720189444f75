//! Growth of rectangles for supercritical families.

use serde::{Deserialize, Serialize};

use super::spread::{Verdict, MAX_WITNESSES};
use super::DropletError;
use crate::bootstrap::{closure, Configuration, Region};
use crate::family::UpdateFamily;
use crate::geometry::{classify, Direction, Rootedness, TriClass};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectangleReport {
    pub rooted: bool,
    /// Midpoint of the free semicircle; rectangles are aligned with it.
    pub axis: Direction,
    pub n1: i64,
    pub n2: i64,
    /// The rectangle one step along `axis`.
    pub left: Verdict,
    /// The rectangle one step against `axis`.
    pub right: Verdict,
    /// Required: `left` for rooted families, both for unrooted ones.
    pub verdict: Verdict,
    pub left_witnesses: Vec<(i64, i64)>,
    pub right_witnesses: Vec<(i64, i64)>,
}

impl RectangleReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} axis={} n1={} n2={} left={} right={}\n",
            self.verdict,
            if self.rooted { "rooted" } else { "unrooted" },
            self.axis,
            self.n1,
            self.n2,
            self.left,
            self.right
        );
        for (tag, w) in [("left", &self.left_witnesses), ("right", &self.right_witnesses)] {
            for p in w {
                s.push_str(&format!("witness {tag} {},{}\n", p.0, p.1));
            }
        }
        if self.verdict == Verdict::Inconclusive {
            s.push_str("hint: increase n1 and n2 beyond the rule radius\n");
        }
        s
    }
}

/// Sites `x` with `k·n1·|g|² ≤ ⟨x, g⟩ < (k+1)·n1·|g|²` and `0 ≤ ⟨x, g⊥⟩ < n2·|g|²`.
fn block(g: Direction, n1: i64, n2: i64, k: i64, b: (i64, i64, i64, i64)) -> Vec<(i64, i64)> {
    let n = g.norm2();
    let p = g.rot_ccw();
    let mut out = Vec::new();
    for y in b.1..=b.3 {
        for x in b.0..=b.2 {
            let a = x * g.x() + y * g.y();
            let c = x * p.x() + y * p.y();
            if k * n1 * n <= a && a < (k + 1) * n1 * n && 0 <= c && c < n2 * n {
                out.push((x, y));
            }
        }
    }
    out
}

/// Seeds the rectangle `V_0` aligned with the free semicircle of a
/// supercritical family, closes it inside a box, and checks that the
/// neighbouring rectangles `V_0 ± n1·g` become infected.
pub fn verify_supercritical_rectangle(family: &UpdateFamily, n1: i64, n2: i64) -> Result<RectangleReport, DropletError> {
    let cls = classify(family);
    if cls.label.tri != TriClass::Supercritical {
        return Err(DropletError::NotSupercritical);
    }
    let rooted = cls.label.rooted == Some(Rootedness::Rooted);
    let g = cls.witness.expect("supercritical families carry a free semicircle").midpoint();
    let r = family.radius() as i64;
    if n1 < r.max(1) || n2 < r.max(1) {
        let none = Verdict::Inconclusive;
        return Ok(RectangleReport {
            rooted,
            axis: g,
            n1,
            n2,
            left: none,
            right: none,
            verdict: none,
            left_witnesses: vec![],
            right_witnesses: vec![],
        });
    }
    let p = g.rot_ccw();
    let corners: Vec<(i64, i64)> = [-n1, 2 * n1]
        .iter()
        .flat_map(|&a| [0, n2].map(move |b| (a * g.x() + b * p.x(), a * g.y() + b * p.y())))
        .collect();
    let m = 2 * r + 2;
    let b = (
        corners.iter().map(|c| c.0).min().unwrap() - m,
        corners.iter().map(|c| c.1).min().unwrap() - m,
        corners.iter().map(|c| c.0).max().unwrap() + m,
        corners.iter().map(|c| c.1).max().unwrap() + m,
    );
    let seed = block(g, n1, n2, 0, b);
    let res = closure(family, &Configuration::with_sites(Region::boxed(b.0, b.1, b.2, b.3), seed));
    let check = |k: i64| {
        let missing: Vec<(i64, i64)> =
            block(g, n1, n2, k, b).into_iter().filter(|&(x, y)| !res.final_config.get(x, y)).collect();
        let v = if missing.is_empty() { Verdict::Pass } else { Verdict::Fail };
        (v, missing.into_iter().take(MAX_WITNESSES).collect::<Vec<_>>())
    };
    let (left, left_witnesses) = check(1);
    let (right, right_witnesses) = check(-1);
    let ok = left == Verdict::Pass && (rooted || right == Verdict::Pass);
    Ok(RectangleReport {
        rooted,
        axis: g,
        n1,
        n2,
        left,
        right,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        left_witnesses,
        right_witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::builtin;

    #[test]
    fn fa1f_grows_both_ways() {
        let r = verify_supercritical_rectangle(&builtin("fa1f").unwrap(), 8, 8).unwrap();
        assert!(!r.rooted);
        assert_eq!((r.left, r.right, r.verdict), (Verdict::Pass, Verdict::Pass, Verdict::Pass));
    }

    #[test]
    fn east_grows_one_way() {
        let r = verify_supercritical_rectangle(&builtin("east2d").unwrap(), 8, 8).unwrap();
        assert!(r.rooted);
        assert_eq!((r.left, r.right, r.verdict), (Verdict::Pass, Verdict::Fail, Verdict::Pass));
        assert!(!r.right_witnesses.is_empty());
    }

    #[test]
    fn tiny_rectangles_are_inconclusive() {
        let r = verify_supercritical_rectangle(&builtin("fa1f").unwrap(), 0, 8).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(verify_supercritical_rectangle(&builtin("duarte").unwrap(), 8, 8).is_err());
    }
}
