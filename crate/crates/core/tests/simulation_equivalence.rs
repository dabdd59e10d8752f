mod support;

use dfm_core::model::ModelKind;
use support::recursion::{direct, random_draw, via_state_space};

#[test]
fn companion_simulation_matches_direct_recursion() {
    for seed in 0..120u64 {
        let kind = ModelKind::ALL[(seed % 6) as usize];
        let draw = random_draw(kind, seed);
        let a = direct(&draw.spec, &draw.params, &draw.drivers);
        let b = via_state_space(&draw);
        let diff = (&a - &b).amax();
        assert!(diff < 1e-10, "seed {seed} ({kind}): {diff}");
    }
}
