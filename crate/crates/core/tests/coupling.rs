//! Statistical properties of coupled fine/coarse paths.

use kinetic_mlmc::stats::{ks_two_sample, ks_two_sample_critical_1pct};
use kinetic_mlmc::{
    coupled_path_pair, make_params, simulate_path, stream_for, InitialCondition, RunningStats, StreamKey,
};

#[test]
fn fine_path_of_a_pair_is_a_plain_fine_path() {
    let pf = make_params(0.3, 0.02).unwrap();
    let pc = make_params(0.3, 0.08).unwrap();
    for i in 0..200 {
        let mut a = stream_for(StreamKey::new(4, 1, i));
        let s = InitialCondition::OriginFairSign.sample(&mut a);
        let (fine, _) = coupled_path_pair(s, &pf, &pc, 10, &mut a).unwrap();
        let mut b = stream_for(StreamKey::new(4, 1, i));
        let s = InitialCondition::OriginFairSign.sample(&mut b);
        let plain = simulate_path(s, &pf, 40, &mut b).unwrap();
        assert_eq!(fine, plain);
    }
}

#[test]
fn coupled_coarse_has_the_coarse_law() {
    let (eps, dtf, m, windows) = (0.5, 0.05, 4u64, 5u64);
    let pf = make_params(eps, dtf).unwrap();
    let pc = make_params(eps, dtf * m as f64).unwrap();
    let n = 20_000u64;
    let mut coupled: Vec<f64> = (0..n)
        .map(|i| {
            let mut d = stream_for(StreamKey::new(21, 1, i));
            let s = InitialCondition::OriginFairSign.sample(&mut d);
            coupled_path_pair(s, &pf, &pc, windows, &mut d).unwrap().1.x
        })
        .collect();
    let mut independent: Vec<f64> = (0..n)
        .map(|i| {
            let mut d = stream_for(StreamKey::new(22, 0, i));
            let s = InitialCondition::OriginFairSign.sample(&mut d);
            simulate_path(s, &pc, windows, &mut d).unwrap().x
        })
        .collect();
    let d = ks_two_sample(&mut coupled, &mut independent);
    assert!(d < ks_two_sample_critical_1pct(n as usize, n as usize), "KS distance {d}");
}

#[test]
fn coupling_shrinks_the_difference_variance() {
    let pf = make_params(1.0, 0.05).unwrap();
    let pc = make_params(1.0, 0.1).unwrap();
    let mut diff = RunningStats::new();
    let mut fine = RunningStats::new();
    for i in 0..20_000 {
        let mut d = stream_for(StreamKey::new(8, 1, i));
        let s = InitialCondition::OriginFairSign.sample(&mut d);
        let (f, c) = coupled_path_pair(s, &pf, &pc, 10, &mut d).unwrap();
        fine.push(f.x * f.x);
        diff.push(f.x * f.x - c.x * c.x);
    }
    assert!(diff.variance() < 0.2 * fine.variance(), "{} vs {}", diff.variance(), fine.variance());
}

#[test]
fn unit_refinement_gives_identical_paths() {
    let p = make_params(0.2, 0.03).unwrap();
    for i in 0..100 {
        let mut d = stream_for(StreamKey::new(1, 1, i));
        let s = InitialCondition::OriginFairSign.sample(&mut d);
        let (f, c) = coupled_path_pair(s, &p, &p, 25, &mut d).unwrap();
        assert_eq!(f, c);
    }
}

#[test]
fn mismatched_levels_are_rejected() {
    let mut d = stream_for(StreamKey::new(0, 0, 0));
    let s = InitialCondition::OriginFairSign.sample(&mut d);
    let pf = make_params(0.2, 0.03).unwrap();
    assert!(coupled_path_pair(s, &pf, &make_params(0.2, 0.07).unwrap(), 1, &mut d).is_err());
    assert!(coupled_path_pair(s, &pf, &make_params(0.3, 0.06).unwrap(), 1, &mut d).is_err());
}
