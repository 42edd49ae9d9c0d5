//! A small built-in scenario for demos and smoke tests.

use crate::knowledge::{EditedFact, Triple};
use crate::llm::FactGraph;

pub struct WorkedExample {
    pub question: String,
    pub graph: FactGraph,
    pub edits: Vec<EditedFact>,
    pub answer: String,
}

fn triple(s: &str, r: &str, o: &str) -> Triple {
    Triple::new(s, r, o).expect("non-empty fields")
}

/// Two chained edits move where the author of "1984" died, and which
/// continent that city is on.
pub fn orwell() -> WorkedExample {
    let mut graph = FactGraph::new();
    for (s, r, o) in [
        ("the novel \"1984\"", "author", "George Orwell"),
        ("George Orwell", "died_in", "London"),
        ("London", "continent", "Europe"),
        ("Bucharest", "continent", "Europe"),
    ] {
        graph.insert(triple(s, r, o)).expect("functional");
    }
    graph
        .add_question(
            vec!["author".into(), "died_in".into(), "continent".into()],
            "The writer of {s} died in which continent?",
        )
        .expect("one subject slot");
    let edits = vec![
        EditedFact::new(
            triple("George Orwell", "died_in", "Bucharest"),
            "George Orwell died in the city of Bucharest.",
            "orwell",
        ),
        EditedFact::new(
            triple("Bucharest", "continent", "North America"),
            "Bucharest is located in the continent of North America.",
            "orwell",
        ),
    ];
    WorkedExample {
        question: "The writer of the novel \u{201c}1984\u{201d} died in which continent?".into(),
        graph,
        edits,
        answer: "North America".into(),
    }
}
