use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crowdwrite_core::doc::{
    export, import_structured, order_key_between, paginate, render_canonical, render_lines, ExportFormat, OrderKey,
};
use crowdwrite_core::service::replay;
use crowdwrite_core::sim::random_transcript;
use crowdwrite_core::{
    parse_seed_outline, ActorId, BlockId, BlockKind, DocumentTree, Service, TaskId, TaskQueue, TaskState,
    TaskTemplate,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Keys built by repeatedly splitting random gaps stay strictly sorted.
    #[test]
    fn order_keys_stay_sorted(positions in prop::collection::vec(any::<prop::sample::Index>(), 1..120)) {
        let mut keys: Vec<OrderKey> = Vec::new();
        for pos in positions {
            let at = pos.index(keys.len() + 1);
            let lo = at.checked_sub(1).map(|i| &keys[i]);
            let hi = keys.get(at);
            let key = order_key_between(lo, hi).unwrap();
            prop_assert!(lo.is_none_or(|lo| *lo < key));
            prop_assert!(hi.is_none_or(|hi| key < *hi));
            prop_assert!(!key.as_str().ends_with('a'));
            keys.insert(at, key);
        }
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    // Dictating into random slots matches a plain vector of ids.
    #[test]
    fn dictation_matches_list_model(slots in prop::collection::vec(any::<prop::sample::Index>(), 0..60)) {
        let mut doc = parse_seed_outline("d".into(), "# Only\n").unwrap();
        let section = BlockId::from("s1");
        let mut model: Vec<BlockId> = Vec::new();
        for slot in slots {
            let at = slot.index(model.len() + 1);
            let after = at.checked_sub(1).map(|i| model[i].clone());
            let (id, _) = doc.insert_block(&section, after.as_ref(), BlockKind::Bullet, "x", None).unwrap();
            model.insert(at, id);
        }
        doc.validate().unwrap();
        let got: Vec<BlockId> = doc.children(&section).iter().map(|b| b.id.clone()).collect();
        prop_assert_eq!(got, model);
    }

    #[test]
    fn structured_export_round_trips(outline in outline_strategy()) {
        let doc = parse_seed_outline("d".into(), &outline).unwrap();
        let bytes = export(&doc, ExportFormat::Structured);
        let back: DocumentTree = import_structured(&bytes).unwrap();
        prop_assert_eq!(export(&back, ExportFormat::Structured), bytes);
        prop_assert_eq!(render_canonical(&back), render_canonical(&doc));
    }

    // Pages are full except the last and concatenate back to the text.
    #[test]
    fn pagination_partitions_lines(outline in outline_strategy(), height in 1usize..50) {
        let doc = parse_seed_outline("d".into(), &outline).unwrap();
        let text = render_canonical(&doc);
        let pages = paginate(&text, height);
        let joined: String = pages.iter().flat_map(|p| p.lines.iter()).map(|l| format!("{l}\n")).collect();
        prop_assert_eq!(joined, text);
        for (i, page) in pages.iter().enumerate() {
            prop_assert_eq!(page.index, i);
            prop_assert!(page.lines.len() <= height);
            if i + 1 < pages.len() {
                prop_assert_eq!(page.lines.len(), height);
            }
        }
        let rendered = render_lines(&doc);
        let placed: usize = rendered.paginate(height).iter().map(|p| p.block_ids.len()).sum();
        prop_assert_eq!(placed, doc.in_display_order().len());
    }

    // Whatever the workers do, a task has at most one holder, a worker holds
    // at most one task, and only the holder may finish or skip it.
    #[test]
    fn task_queue_holds_one_task_per_worker(
        ops in prop::collection::vec((0usize..4, 0usize..4, any::<bool>()), 1..200),
        seed in any::<u64>(),
    ) {
        let doc = parse_seed_outline("d".into(), "# A\n").unwrap();
        let mut q = TaskQueue::default();
        let templates: Vec<TaskTemplate> =
            (0..6).map(|i| TaskTemplate { description: format!("t{i}"), target_section: None }).collect();
        let mut n = 0;
        q.seed_tasks(&doc, &templates, || { n += 1; TaskId(format!("t{n}")) }, 1).unwrap();
        let workers: Vec<ActorId> = (0..4).map(|i| ActorId(format!("w{i}"))).collect();
        let active: BTreeSet<ActorId> = workers.iter().cloned().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (w, op, flag) in ops {
            let worker = &workers[w];
            match op {
                0 => { q.next_task(worker, &mut rng); }
                1 => {
                    if let Some(t) = q.held_by(worker).map(|t| t.id.clone()) {
                        q.skip_task(worker, &t).unwrap();
                        q.escalate_check(&active);
                    }
                }
                2 => {
                    if let Some(t) = q.held_by(worker).map(|t| t.id.clone()) {
                        q.complete_task(worker, &t).unwrap();
                    }
                }
                _ => {
                    // Someone who does not hold the task cannot release it.
                    let other = &workers[(w + 1) % 4];
                    if let Some(t) = q.held_by(other).map(|t| t.id.clone()) {
                        let r = if flag { q.skip_task(worker, &t) } else { q.complete_task(worker, &t) };
                        prop_assert!(r.is_err());
                    }
                }
            }
            let mut holders = BTreeSet::new();
            for task in q.tasks() {
                prop_assert_eq!(task.state == TaskState::Assigned, task.assignee.is_some());
                if let Some(a) = &task.assignee {
                    prop_assert!(holders.insert(a.clone()), "{} holds two tasks", a);
                    prop_assert!(!task.skip_set.contains(a));
                }
                if task.state == TaskState::Escalated {
                    prop_assert!(active.is_subset(&task.skip_set));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn replay_reproduces_live_state(seed in any::<u64>()) {
        let service = Service::in_memory();
        random_transcript(seed, 120, &service).unwrap();
        let replayed = replay(&service.events()).unwrap();
        prop_assert_eq!(replayed.digest(), service.digest());
    }
}

fn outline_strategy() -> impl Strategy<Value = String> {
    let words = prop::collection::vec("[a-z]{1,12}", 1..30).prop_map(|w| w.join(" "));
    let section = (words.clone(), prop::collection::vec(words, 0..5));
    prop::collection::vec(section, 1..8).prop_map(|sections| {
        let mut out = String::new();
        for (title, bullets) in sections {
            out.push_str(&format!("# {title}\n"));
            for b in bullets {
                out.push_str(&format!("- {b}\n"));
            }
        }
        out
    })
}
