use dqd_scatter::bound::{single_particle_spectrum, ChannelBasis};
use dqd_scatter::model::{DeviceSpec, EnergyScale, GridSpec, MaterialParams, Model};
use dqd_scatter::qtbm::{enumerate_channels, ChannelKind, ScatteringProblem};

// SI constants, kept apart from the crate's own meV·nm constants.
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
const COULOMB_K: f64 = 8.987_551_792_3e9;

#[test]
fn pair_interaction_matches_si_evaluation() {
    // 41 points over 100 nm: nodes 20 apart sit 50 nm apart.
    let model = Model::reference(41).unwrap();
    let dx_nm: f64 = 50.0;
    let r_nm = (dx_nm * dx_nm + 1.0).sqrt();
    let joules = COULOMB_K * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (r_nm * 1e-9);
    let mev = joules / ELEMENTARY_CHARGE * 1e3 / 12.9 * (-r_nm / 1000.0).exp();
    assert!((model.pair(5, 25) - mev).abs() < 1e-6 * mev, "{} vs {mev}", model.pair(5, 25));
    assert_eq!(model.pair(5, 25), model.pair(25, 5));
}

#[test]
fn deep_isolated_well_follows_the_box_pattern() {
    let depth = 1e4;
    let grid = GridSpec::new(401, 100.0).unwrap();
    let scale = EnergyScale::from_material(&MaterialParams::default());
    // nodes 140..=260 inclusive form a 30 nm well
    let pot: Vec<f64> = (0..401).map(|i| if (140..=260).contains(&i) { -depth } else { 0.0 }).collect();
    let (e, _) = single_particle_spectrum(&pot, &grid, &scale, 4).unwrap();
    let de: Vec<f64> = e.iter().map(|x| x - e[0]).collect();
    for n in 2..=4 {
        let ratio = de[n - 1] / de[1];
        let boxed = (n * n - 1) as f64 / 3.0;
        assert!((ratio - boxed).abs() < 1e-2 * boxed, "n={n}: {ratio} vs {boxed}");
    }
    // width between the first barrier nodes on either side
    let w = 122.0 * grid.spacing;
    let e1 = scale.kinetic_prefactor * (std::f64::consts::PI / w).powi(2);
    assert!(((e[0] + depth) - e1).abs() < 2e-2 * e1, "{} vs {e1}", e[0] + depth);
}

#[test]
fn ground_pair_shift_is_bracketed_by_coulomb_expectations() {
    let model = Model::reference(41).unwrap();
    let basis = ChannelBasis::compute(&model, 6).unwrap();
    let q = basis.qubit.as_ref().unwrap();
    let n = model.grid.points_per_axis;
    let w = model.grid.spacing;
    let e00 = q.orbitals.left[0].energy + q.orbitals.right[0].energy;
    let shift = basis.states[q.channels[0]].energy - e00;

    let xi0 = &basis.states[q.channels[0]].wavefunction;
    let mut w_exact = 0.0;
    let mut w_product = 0.0;
    let (l, r) = (&q.orbitals.left[0].wavefunction, &q.orbitals.right[0].wavefunction);
    for a in 0..n {
        for b in 0..n {
            let v = model.pair(a, b);
            w_exact += xi0[a * n + b].powi(2) * w * w * v;
            let prod = std::f64::consts::FRAC_1_SQRT_2 * (l[a] * r[b] - r[a] * l[b]);
            w_product += prod * prod * w * w * v;
        }
    }
    // ⟨Ξ₀|W|Ξ₀⟩ ≤ ε₀ − (E₀ᴸ + E₀ᴿ) ≤ ⟨00|W|00⟩ by the variational principle
    assert!(w_exact > 0.0);
    assert!(shift >= w_exact - 1e-9, "{shift} < {w_exact}");
    assert!(shift <= w_product + 1e-9, "{shift} > {w_product}");
    assert!((shift - w_exact) < 0.05 * w_exact);
}

#[test]
fn resonant_injection_opens_the_excited_bell_channel() {
    let model = Model::reference(41).unwrap();
    let basis = ChannelBasis::compute(&model, 6).unwrap();
    let (c0, c2) = (basis.channel_of(0), basis.channel_of(2));
    let gap = basis.states[c2].energy - basis.states[c0].energy;
    // the coarse grid underestimates the qubit gap by about 1.3 meV
    assert!((gap - 13.1).abs() < 1.5, "gap {gap}");
    let p = ScatteringProblem::new(&model, &basis, c0, 15.8).unwrap();
    let ch = enumerate_channels(&p);
    assert_eq!(ch[c2].kind, ChannelKind::Traveling);
    assert!((ch[c2].kinetic - (15.8 - gap)).abs() < 1e-12);
    assert!((ch[c2].kinetic - 2.7).abs() < 1.5);
}

#[test]
fn potential_is_mirror_symmetric() {
    for n in [21, 41, 66] {
        let m = Model::reference(n).unwrap();
        let v = m.potential();
        assert!(v.iter().zip(v.iter().rev()).all(|(a, b)| a == b));
        assert_eq!(v[0], 0.0);
        assert_eq!(*v.iter().fold(&0.0, |a, b| if b < a { b } else { a }), -110.0);
    }
    let bad = DeviceSpec {
        well_width_nm: 60.0,
        ..DeviceSpec::default()
    };
    assert!(Model::new(MaterialParams::default(), bad, 41, Default::default()).is_err());
}
