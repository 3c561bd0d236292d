//! Records which lesions each network trained on and scored, so fold
//! hygiene can be audited after the fact.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRole {
    Stage(usize),
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetId {
    pub fold: usize,
    pub role: NetRole,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lineage {
    /// Root lesion ids in each network's training set, augmentations included.
    pub trained_on: BTreeMap<NetId, BTreeSet<String>>,
    /// `(network, root lesion id)` for every score computed during training.
    pub scored: Vec<(NetId, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HygieneAudit {
    pub checked: usize,
    /// Scoring events where the network had trained on the lesion or its augmentations.
    pub violations: Vec<(NetId, String)>,
}

/// Checks every scoring event from training and from `extra` (e.g. the trace
/// of [`super::predict_all_traced`]) against the scoring network's training set.
pub fn audit_fold_hygiene(lineage: &Lineage, extra: &[(NetId, String)]) -> HygieneAudit {
    let empty = BTreeSet::new();
    let mut audit = HygieneAudit {
        checked: 0,
        violations: Vec::new(),
    };
    for (net, lesion) in lineage.scored.iter().chain(extra) {
        audit.checked += 1;
        if lineage
            .trained_on
            .get(net)
            .unwrap_or(&empty)
            .contains(lesion)
        {
            audit.violations.push((*net, lesion.clone()));
        }
    }
    audit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_scoring_of_training_lesions() {
        let net = NetId {
            fold: 0,
            role: NetRole::Final,
        };
        let mut lineage = Lineage::default();
        lineage.trained_on.insert(net, ["a".to_string()].into());
        lineage.scored.push((net, "b".into()));
        let audit = audit_fold_hygiene(&lineage, &[(net, "a".into())]);
        assert_eq!(audit.checked, 2);
        assert_eq!(audit.violations, vec![(net, "a".to_string())]);
    }
}
