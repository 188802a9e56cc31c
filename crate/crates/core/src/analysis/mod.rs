//! Language analysis: dialog trees, leaf concepts, the evolution timeline
//! and grounding tables.

mod concept;
mod evolution;
mod grounding;
mod tree;

pub use concept::{is_pure, leaf_concept, Concept};
pub use evolution::{backtrack_evolution, grounding_timeline, pearson, EvolutionRecord, NodeId, TimelinePoint};
pub use grounding::{extract_grounding_tables, AnswerGrounding, GroundingTable, QuestionGrounding};
pub use tree::{build_dialog_tree, DialogPath, DialogTree, TREE_DEPTH};

#[cfg(test)]
mod tests {
    use alloc::vec::Vec;

    use super::*;
    use crate::agents::lookup::{X, Y, Z};
    use crate::agents::{AgentError, DialogTranscript, LookupTeam, Team};
    use crate::world::{enumerate_instances, Attribute, Episode, ObjectInstance, Task, TASKS};

    fn task(a: &str, b: &str) -> Task {
        Task::new(Attribute::from_name(a).unwrap(), Attribute::from_name(b).unwrap()).unwrap()
    }

    fn inst(c: &str, s: &str, t: &str) -> ObjectInstance {
        ObjectInstance::from_names(c, s, t).unwrap()
    }

    #[test]
    fn oracle_tree_shape() {
        let tree = build_dialog_tree(&LookupTeam::table2(), &enumerate_instances(), &TASKS).unwrap();
        assert_eq!(tree.leaf_count(), 144);
        assert_eq!(tree.depth(), 4);
        assert_eq!(tree.total_tuples(), 64 * 6);
    }

    #[test]
    fn oracle_leaf_y1x1_is_blue_triangles_for_shape_color() {
        let tree = build_dialog_tree(&LookupTeam::table2(), &enumerate_instances(), &TASKS).unwrap();
        let path = [Y as u16, 0, X as u16, 0];
        let sc = task("shape", "color");
        let here = tree.subtree_for_task(&path, sc);
        assert_eq!(here.len(), 4);
        assert!(here.iter().all(|(i, _)| i.value(Attribute::Color).name() == "blue"
            && i.value(Attribute::Shape).name() == "triangle"));
        let c = leaf_concept(&here).unwrap();
        assert_eq!(alloc::format!("{c}"), "(blue, triangle, *, shape, color)");
    }

    #[test]
    fn paths_round_trip() {
        let team = LookupTeam::table2();
        let episodes: Vec<Episode> = enumerate_instances().iter().flat_map(|&i| TASKS.map(|t| (i, t))).collect();
        let transcripts = team.play_greedy(&episodes).unwrap();
        let tree = DialogTree::from_transcripts(3, 4, &transcripts).unwrap();
        for t in transcripts.iter().step_by(7) {
            let expect = [t.questions[0], t.answers[0], t.questions[1], t.answers[1]].map(|x| x as u16);
            assert_eq!(tree.path_of(t.instance, t.task), Some(expect));
        }
    }

    #[test]
    fn out_of_range_tokens_are_rejected() {
        let mut tree = DialogTree::new(3, 4);
        let ep = (inst("red", "star", "solid"), TASKS[0]);
        assert!(tree.insert([0, 4, 0, 0], ep).is_err());
        assert!(tree.insert([3, 0, 0, 0], ep).is_err());
        assert!(tree.insert([2, 3, 2, 3], ep).is_ok());
    }

    #[test]
    fn concept_examples() {
        let sc = task("shape", "color");
        let a = (inst("blue", "triangle", "dotted"), sc);
        let b = (inst("blue", "triangle", "filled"), sc);
        let c = leaf_concept(&[a, b]).unwrap();
        assert_eq!(alloc::format!("{c}"), "(blue, triangle, *, shape, color)");
        assert_eq!(leaf_concept(&[a]).unwrap(), Concept::of(a));
        assert_eq!(leaf_concept(&[a]).unwrap().wildcards(), 0);
        assert_eq!(leaf_concept(&[]), None);
        assert_eq!(leaf_concept(&[a, (b.0, task("color", "shape"))]), None);
    }

    #[test]
    fn concepts_only_generalize() {
        let t = TASKS[3];
        let all = enumerate_instances();
        let mut tuples = Vec::new();
        let mut prev = 0;
        for (k, &i) in all.iter().enumerate().step_by(5) {
            tuples.push((i, t));
            let c = leaf_concept(&tuples).unwrap();
            assert!(c.wildcards() >= prev, "step {k}");
            assert!(tuples.iter().all(|&e| c.matches(e)));
            prev = c.wildcards();
        }
    }

    #[test]
    fn purity() {
        let sc = task("shape", "color");
        let a = (inst("blue", "triangle", "dotted"), sc);
        let b = (inst("blue", "triangle", "filled"), sc);
        let odd = (inst("red", "triangle", "filled"), sc);
        let c = leaf_concept(&[a, b]).unwrap();
        assert!(is_pure(&[a, b], &c));
        assert!(!is_pure(&[a, odd], &c));
        assert!(is_pure(&[], &c));
    }

    /// Trees where one tuple sits on the "right" leaf only from checkpoint
    /// `from` onwards.
    fn fixture(from: usize, len: usize) -> Vec<DialogTree> {
        let t = TASKS[0];
        let good = [(inst("blue", "triangle", "dotted"), t), (inst("blue", "triangle", "solid"), t)];
        let stray = (inst("red", "star", "solid"), t);
        (0..len)
            .map(|k| {
                let mut tree = DialogTree::new(3, 4);
                for &g in &good {
                    tree.insert([0, 0, 1, 0], g).unwrap();
                }
                let stray_path = if k < from { [0, 0, 1, 0] } else { [2, 3, 2, 3] };
                tree.insert(stray_path, stray).unwrap();
                tree
            })
            .collect()
    }

    #[test]
    fn backtracking_finds_known_purity_checkpoint() {
        let trees = fixture(3, 6);
        let records = backtrack_evolution(&trees, trees.last().unwrap());
        let leaf = records
            .iter()
            .find(|r| r.node.prefix == [0, 0, 1, 0])
            .expect("leaf record");
        assert_eq!(leaf.checkpoint, 3);
        assert_eq!(alloc::format!("{}", leaf.concept), "(blue, triangle, *, color, shape)");
        // the stray's own leaf was empty (vacuously pure) before it arrived
        let other = records.iter().find(|r| r.node.prefix == [2, 3, 2, 3]).unwrap();
        assert_eq!(other.checkpoint, 0);
        // shared prefix [0, 0] holds the stray until it moves, then only blue triangles
        let shared = records.iter().find(|r| r.node.prefix == [0, 0]).unwrap();
        assert_eq!(shared.checkpoint, 3);
        assert!(records.iter().all(|r| r.checkpoint < trees.len()));
    }

    #[test]
    fn always_pure_nodes_date_from_the_first_checkpoint() {
        let trees = fixture(0, 4);
        let records = backtrack_evolution(&trees, trees.last().unwrap());
        assert!(!records.is_empty());
        assert!(records.iter().all(|r| r.checkpoint == 0));
    }

    #[test]
    fn impure_at_last_checkpoint_gives_no_record() {
        let trees = fixture(10, 4);
        let final_tree = fixture(0, 1).pop().unwrap();
        let records = backtrack_evolution(&trees, &final_tree);
        assert!(records.iter().all(|r| r.node.prefix != [0, 0, 1, 0]));
    }

    #[test]
    fn later_checkpoints_stay_pure() {
        let trees = fixture(2, 7);
        let final_tree = trees.last().unwrap();
        for r in backtrack_evolution(&trees, final_tree) {
            for tree in &trees[r.checkpoint..] {
                assert!(is_pure(&tree.subtree_for_task(&r.node.prefix, r.node.task), &r.concept));
            }
        }
    }

    #[test]
    fn timeline_is_cumulative() {
        let trees = fixture(3, 6);
        let records = backtrack_evolution(&trees, trees.last().unwrap());
        let acc = [10.0, 20.0, 30.0, 90.0, 95.0, 100.0];
        let points = grounding_timeline(&records, &acc);
        assert_eq!(points.len(), 6);
        assert!(points.windows(2).all(|w| w[0].grounded <= w[1].grounded));
        assert_eq!(points.last().unwrap().grounded, records.len());
        let xs: Vec<f64> = points.iter().map(|p| p.grounded as f64).collect();
        assert!(pearson(&xs, &acc).unwrap() > 0.5);
    }

    #[test]
    fn pearson_edge_cases() {
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_grounding_reproduces_both_tables() {
        let g = extract_grounding_tables(&LookupTeam::table2()).unwrap();
        let expect_q = [
            (("color", "shape"), [Y, X]),
            (("shape", "color"), [Y, X]),
            (("shape", "style"), [Y, Z]),
            (("style", "shape"), [Y, Z]),
            (("color", "style"), [Z, X]),
            (("style", "color"), [X, Z]),
        ];
        for ((a, b), qs) in expect_q {
            let row = g.questions.iter().find(|r| r.task == task(a, b)).unwrap();
            assert_eq!(row.questions, qs, "{a},{b}");
            assert!(row.consistent);
        }
        let attrs = [Attribute::Color, Attribute::Shape, Attribute::Style];
        for (q, attr) in attrs.into_iter().enumerate() {
            let a = g.answer(q).unwrap();
            assert_eq!(a.attribute, Some(attr));
            assert_eq!(a.tokens, [0, 1, 2, 3]);
            assert!(a.injective);
        }
        // X about a blue instance answers 1 (shown 1-based)
        let blue = inst("blue", "star", "dashed");
        let tok = LookupTeam::table2().probe_answer(X, blue).unwrap();
        assert_eq!(GroundingTable::answer_label(tok), "1");
        assert!(g.is_compositional());
        assert_eq!(g.question_label(Z), "Z");
    }

    #[test]
    fn oracle_grounding_table_prints_like_the_reference() {
        let text = alloc::format!("{}", extract_grounding_tables(&LookupTeam::table2()).unwrap());
        assert!(text.contains("X: color: blue->1 purple->2 green->3 red->4"), "{text}");
        assert!(text.contains("(style, color): X, Z"), "{text}");
    }

    /// Answers that mix two attributes.
    struct Mixed;

    impl Team for Mixed {
        fn vocab_sizes(&self) -> (usize, usize) {
            (1, 4)
        }

        fn play_greedy(&self, episodes: &[Episode]) -> Result<Vec<DialogTranscript>, AgentError> {
            LookupTeam::table2().play_greedy(episodes)
        }

        fn probe_answer(&self, _: usize, i: ObjectInstance) -> Result<usize, AgentError> {
            Ok((i.value(Attribute::Color).value() + i.value(Attribute::Shape).value()) % 4)
        }
    }

    #[test]
    fn mixed_answers_are_inconsistent() {
        let g = extract_grounding_tables(&Mixed).unwrap();
        assert_eq!(g.answers.len(), 1);
        assert!(!g.answers[0].consistent());
        assert!(g.answers[0].tokens.is_empty());
    }

    #[test]
    fn constant_answers_map_to_the_first_attribute() {
        struct Mute;
        impl Team for Mute {
            fn vocab_sizes(&self) -> (usize, usize) {
                (1, 4)
            }
            fn play_greedy(&self, episodes: &[Episode]) -> Result<Vec<DialogTranscript>, AgentError> {
                LookupTeam::table2().play_greedy(episodes)
            }
            fn probe_answer(&self, _: usize, _: ObjectInstance) -> Result<usize, AgentError> {
                Ok(2)
            }
        }
        let g = extract_grounding_tables(&Mute).unwrap();
        assert_eq!(g.answers[0].attribute, Some(Attribute::Color));
        assert!(!g.answers[0].injective);
    }
}
