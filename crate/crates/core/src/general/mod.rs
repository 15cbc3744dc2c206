//! Multi-view separation over an arbitrary set system: which components feed
//! which views, whether that system is identifiable at a given cumulant order,
//! and the recovery of maps and component cumulants.

mod extract;

pub use extract::{compute_cumulants, find_linear, find_linear_in_order, GeneralExtraction, GeneralOptions};

use serde::{Deserialize, Serialize};

use crate::error::{RcaError, Result};

/// Components `S_j` and the views `Q_j ⊆ {1..k}` each one appears in.
/// Views are numbered from 1, matching the JSON format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSetSystem", into = "RawSetSystem")]
pub struct SetSystem {
    k: usize,
    subsets: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawSetSystem {
    k: usize,
    subsets: Vec<Vec<usize>>,
}

impl TryFrom<RawSetSystem> for SetSystem {
    type Error = RcaError;

    fn try_from(raw: RawSetSystem) -> Result<Self> {
        SetSystem::new(raw.k, raw.subsets)
    }
}

impl From<SetSystem> for RawSetSystem {
    fn from(s: SetSystem) -> Self {
        RawSetSystem {
            k: s.k,
            subsets: s.subsets,
        }
    }
}

impl SetSystem {
    /// Validates and normalizes (sorts) each subset. Subsets keep their order.
    pub fn new(k: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 {
            return Err(RcaError::InvalidInput("set system needs at least one view".into()));
        }
        let mut norm: Vec<Vec<usize>> = Vec::with_capacity(subsets.len());
        for mut q in subsets {
            q.sort_unstable();
            q.dedup();
            if q.is_empty() {
                return Err(RcaError::InvalidInput("subsets must be nonempty".into()));
            }
            if let Some(&bad) = q.iter().find(|&&i| i == 0 || i > k) {
                return Err(RcaError::InvalidInput(format!("view {bad} outside 1..={k}")));
            }
            if norm.contains(&q) {
                return Err(RcaError::InvalidInput(format!("subset {q:?} listed twice")));
            }
            norm.push(q);
        }
        if norm.is_empty() {
            return Err(RcaError::InvalidInput("set system has no subsets".into()));
        }
        Ok(SetSystem { k, subsets: norm })
    }

    /// The two-view system `{{1}, {1,2}, {2}}`.
    pub fn contrastive() -> Self {
        SetSystem::new(2, vec![vec![1], vec![1, 2], vec![2]]).unwrap()
    }

    /// Every nonempty subset of `{1..k}`.
    pub fn power_set(k: usize) -> Self {
        let subsets = (1u32..(1 << k))
            .map(|mask| (0..k).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).collect())
            .collect();
        SetSystem::new(k, subsets).unwrap()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Smallest `L` at which the system is distinguishable.
    pub fn level(&self) -> usize {
        (1..=self.k)
            .find(|&l| matches!(check_distinguishable(self, l), Ok(Distinguishability::Certified(_))))
            .expect("every system of distinct sets is k-distinguishable")
    }

    /// Indices with supersets first: descending size, then lexicographic.
    pub fn processing_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.subsets.len()).collect();
        order.sort_by(|&a, &b| {
            let (qa, qb) = (&self.subsets[a], &self.subsets[b]);
            qb.len().cmp(&qa.len()).then_with(|| qa.cmp(qb))
        });
        order
    }

    /// Whether `order` processes every set before any of its proper subsets.
    pub fn is_valid_order(&self, order: &[usize]) -> bool {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.len()).collect::<Vec<_>>() {
            return false;
        }
        order.iter().enumerate().all(|(pos, &j)| {
            order[pos + 1..]
                .iter()
                .all(|&later| !is_proper_subset(&self.subsets[j], &self.subsets[later]))
        })
    }
}

pub(crate) fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

pub(crate) fn is_proper_subset(a: &[usize], b: &[usize]) -> bool {
    a.len() < b.len() && is_subset(a, b)
}

/// Outcome of a distinguishability check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distinguishability {
    /// Distinguishing set `T_j` for every subset, in subset order.
    Certified(Vec<Vec<usize>>),
    /// `subset` has no distinguishing set of size at most `level`; `candidate`
    /// (the last one tried) is contained in `blocker`, which is not a superset.
    Failed {
        subset: Vec<usize>,
        candidate: Vec<usize>,
        blocker: Vec<usize>,
    },
}

/// Exhaustive search for distinguishing sets of size at most `level`,
/// smallest first and lexicographic among equal sizes.
pub fn check_distinguishable(system: &SetSystem, level: usize) -> Result<Distinguishability> {
    if level == 0 || level > system.k {
        return Err(RcaError::InvalidInput(format!(
            "level must lie in 1..={}, got {level}",
            system.k
        )));
    }
    let mut cert = Vec::with_capacity(system.len());
    for (j, q) in system.subsets.iter().enumerate() {
        let mut last = None;
        let found = (1..=level.min(q.len())).find_map(|size| {
            combinations(q, size).into_iter().find(|t| {
                let blocker = system.subsets.iter().enumerate().find(|&(jj, other)| {
                    jj != j && !is_subset(q, other) && is_subset(t, other)
                });
                if let Some((_, b)) = blocker {
                    last = Some((t.clone(), b.clone()));
                }
                blocker.is_none()
            })
        });
        match found {
            Some(t) => cert.push(t),
            None => {
                let (candidate, blocker) = last.expect("nonempty subsets always yield a candidate");
                return Ok(Distinguishability::Failed {
                    subset: q.clone(),
                    candidate,
                    blocker,
                });
            }
        }
    }
    Ok(Distinguishability::Certified(cert))
}

/// `size`-element subsets of `items` in lexicographic order.
fn combinations(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, size, 0, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrastive_system_is_two_distinguishable() {
        let s = SetSystem::contrastive();
        assert_eq!(
            check_distinguishable(&s, 2).unwrap(),
            Distinguishability::Certified(vec![vec![1], vec![1, 2], vec![2]])
        );
        assert!(matches!(check_distinguishable(&s, 1).unwrap(), Distinguishability::Failed { .. }));
        assert_eq!(s.level(), 2);
    }

    #[test]
    fn single_subset() {
        let s = SetSystem::new(1, vec![vec![1]]).unwrap();
        assert_eq!(
            check_distinguishable(&s, 1).unwrap(),
            Distinguishability::Certified(vec![vec![1]])
        );
    }

    #[test]
    fn power_set_needs_full_level() {
        let s = SetSystem::power_set(3);
        assert!(matches!(check_distinguishable(&s, 3).unwrap(), Distinguishability::Certified(_)));
        match check_distinguishable(&s, 2).unwrap() {
            Distinguishability::Failed { subset, candidate, blocker } => {
                assert_eq!(subset, vec![1, 2, 3]);
                assert!(is_subset(&candidate, &blocker));
                assert!(!is_subset(&subset, &blocker));
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(SetSystem::new(2, vec![vec![1], vec![1]]).is_err());
        assert!(SetSystem::new(2, vec![vec![]]).is_err());
        assert!(SetSystem::new(2, vec![vec![3]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s: SetSystem = serde_json::from_str(r#"{"k": 3, "subsets": [[2,1],[2,3],[1,2,3]]}"#).unwrap();
        assert_eq!(s.subsets()[0], vec![1, 2]);
        let back: SetSystem = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SetSystem>(r#"{"k": 2, "subsets": [[1],[1]]}"#).is_err());
    }

    #[test]
    fn processing_order_puts_supersets_first() {
        let s = SetSystem::new(3, vec![vec![1, 2], vec![2, 3], vec![1, 2, 3]]).unwrap();
        assert_eq!(s.processing_order(), vec![2, 0, 1]);
        assert!(s.is_valid_order(&[2, 1, 0]));
        assert!(!s.is_valid_order(&[0, 2, 1]));
    }
}
