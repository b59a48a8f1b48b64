mod common;

use common::{oracle_mismatches, oracle_select, Instance};

#[test]
fn select_csr_matches_brute_force_on_random_instances() {
    let bad = oracle_mismatches(1000);
    assert!(bad.is_empty(), "mismatching seeds: {bad:?}");
}

#[test]
fn instances_exercise_every_stage() {
    let mut escalated = 0;
    let mut ranked = 0;
    let mut relaxed = 0;
    for seed in 0..1000 {
        let inst = Instance::random(seed);
        let sel = oracle_select(&inst).unwrap();
        let total = ((inst.cfg.rri_ms) * (inst.layout.num_subchannels - inst.width + 1)) as usize;
        if sel.survivors.len() < total {
            ranked += 1;
        }
        let rec = inst.record();
        let tiebreak: Vec<u64> = (0..total as u64).collect();
        let out = cv2x_mode4::mac::filter_candidates(&rec, &inst.layout, &inst.cfg, inst.now, inst.width, &tiebreak);
        if out.iterations > 1 {
            escalated += 1;
        }
        if out.half_duplex_relaxed {
            relaxed += 1;
        }
    }
    assert!(escalated > 20, "{escalated}");
    assert!(ranked > 100, "{ranked}");
    assert!(relaxed > 0, "{relaxed}");
}
