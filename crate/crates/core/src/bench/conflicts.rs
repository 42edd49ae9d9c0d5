use std::collections::{BTreeSet, HashMap};

use super::{Dataset, Instance};

/// Ids of instances whose post-edit chain is overridden by an edit from a
/// different instance: same subject and relation, different object.
pub fn detect_conflicts(ds: &Dataset) -> BTreeSet<String> {
    let mut edits_by_key: HashMap<(String, String), Vec<(&str, String)>> = HashMap::new();
    for inst in &ds.instances {
        for e in &inst.edits {
            edits_by_key
                .entry(e.triple.key())
                .or_default()
                .push((inst.id.as_str(), e.triple.normalized_object()));
        }
    }
    ds.instances
        .iter()
        .filter(|inst| {
            inst.gold_chain.iter().any(|t| {
                edits_by_key.get(&t.key()).is_some_and(|edits| {
                    let object = t.normalized_object();
                    edits.iter().any(|(source, o)| *source != inst.id && *o != object)
                })
            })
        })
        .map(|inst| inst.id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CleanMode {
    /// Repeat the filter until no conflicts remain.
    #[default]
    FixedPoint,
    /// Filter once.
    OneShot,
}

/// Removes conflicted instances.
pub fn build_clean(ds: &Dataset, mode: CleanMode) -> Dataset {
    let mut current = ds.clone();
    loop {
        let conflicted = detect_conflicts(&current);
        if conflicted.is_empty() {
            break;
        }
        current.instances.retain(|i| !conflicted.contains(&i.id));
        if mode == CleanMode::OneShot {
            break;
        }
    }
    current.name = format!("{}-clean", ds.name);
    current
}

/// Instances outside `excluded` whose edit count equals the largest edit
/// count in the full dataset.
pub fn build_hard(full: &Dataset, excluded: &BTreeSet<String>) -> Dataset {
    let max = full.instances.iter().map(|i| i.edits.len()).max().unwrap_or(0);
    let instances: Vec<Instance> = full
        .instances
        .iter()
        .filter(|i| i.edits.len() == max && !excluded.contains(&i.id))
        .cloned()
        .collect();
    if instances.is_empty() {
        tracing::warn!(
            max_edits = max,
            "no instance outside the excluded set has the maximum edit count"
        );
    }
    Dataset::new(format!("{}-hard", full.name), instances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{EditedFact, Triple};

    fn t(s: &str, r: &str, o: &str) -> Triple {
        Triple::new(s, r, o).unwrap()
    }

    fn inst(id: &str, chain: Vec<Triple>, edits: Vec<Triple>) -> Instance {
        Instance {
            id: id.into(),
            questions: vec![format!("q{id}")],
            orig_answer: String::new(),
            orig_answer_aliases: vec![],
            new_answer: chain.last().unwrap().object.clone(),
            answer_aliases: vec![],
            edits: edits
                .into_iter()
                .map(|e| {
                    let text = format!("{} {} {}.", e.subject, e.relation, e.object);
                    EditedFact::new(e, text, id)
                })
                .collect(),
            gold_chain: chain,
            orig_chain: vec![],
            distractors: vec![],
        }
    }

    #[test]
    fn exact_match_is_not_a_conflict() {
        let a = inst("a", vec![t("X", "r", "Y")], vec![t("X", "r", "Y")]);
        let b = inst("b", vec![t("P", "r", "Q")], vec![t("X", "r", "Y")]);
        assert!(detect_conflicts(&Dataset::new("d", vec![a, b])).is_empty());
    }

    #[test]
    fn single_instance_has_no_conflicts() {
        let a = inst("a", vec![t("X", "r", "Y")], vec![t("X", "r", "Z")]);
        assert!(detect_conflicts(&Dataset::new("d", vec![a])).is_empty());
    }

    #[test]
    fn one_shot_can_leave_conflicts_that_fixed_point_removes() {
        // Conflicts only depend on the edit set, so removing instances can
        // never create new ones; one pass already reaches the fixed point.
        let a = inst("a", vec![t("X", "r", "Y")], vec![]);
        let b = inst("b", vec![t("X", "r", "Z")], vec![t("X", "r", "Z")]);
        let ds = Dataset::new("d", vec![a, b]);
        let once = build_clean(&ds, CleanMode::OneShot);
        let fixed = build_clean(&ds, CleanMode::FixedPoint);
        assert_eq!(once.instances, fixed.instances);
        assert!(detect_conflicts(&fixed).is_empty());
    }

    #[test]
    fn hard_subset_uses_pre_exclusion_maximum() {
        let four = || (0..4).map(|i| t(&format!("S{i}"), "r", "O")).collect::<Vec<_>>();
        let a = inst("a", vec![t("X", "r", "Y")], four());
        let b = inst("b", vec![t("X", "r", "Y")], four());
        let c = inst("c", vec![t("X", "r", "Y")], vec![t("S", "r", "O")]);
        let ds = Dataset::new("d", vec![a, b, c]);
        let hard = build_hard(&ds, &BTreeSet::from(["a".to_string()]));
        assert_eq!(
            hard.instances.iter().map(|i| i.id.as_str()).collect::<Vec<_>>(),
            vec!["b"]
        );
        let none = build_hard(&ds, &BTreeSet::from(["a".to_string(), "b".to_string()]));
        assert!(none.is_empty());
    }
}
