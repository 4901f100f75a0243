use nvcav_core::kinetics::{build_rate_matrix, evolve, residual, steady_state, Integrator, Level, Populations, Variant};
use nvcav_core::model::{default_parameters, driving_rates, driving_rates_from_powers, CavityGeometry, DrivingRates, NvParameters, PhysicalConstants};
use proptest::prelude::*;

/// Right-hand sides of the seven balance equations written out term by term
/// (stimulated-emission losses on 3 and 4, population factors on the NV⁰
/// pump and recombination terms). Kept separate from the matrix assembly.
fn rhs(par: &NvParameters, k: &DrivingRates, p: &[f64; 7]) -> [f64; 7] {
    let [p1, p2, p3, p4, p5, p6, p7] = *p;
    let pump = k.k_pump_g + k.k_pump_r;
    let ion = k.k_ion_g + k.k_ion_r;
    let rec = k.k_rec_g + k.k_rec_r;
    [
        -pump * p1 + par.r31 * p3 + k.k_stim * p3 + par.r51 * p5 + 0.5 * rec * p7,
        -pump * p2 + par.r42 * p4 + k.k_stim * p4 + par.r52 * p5 + 0.5 * rec * p7,
        -(par.r31 + par.r35 + ion + k.k_stim) * p3 + pump * p1,
        -(par.r41() + par.r45 + ion + k.k_stim) * p4 + pump * p2,
        -(par.r52 + par.r51 + k.k_ion_s) * p5 + par.r35 * p3 + par.r45 * p4,
        -k.k_pump_nv0 * p6 + (par.r76 + k.k_stim_nv0) * p7 + k.k_ion_s * p5 + ion * (p3 + p4),
        -(par.r76 + k.k_stim_nv0) * p7 - rec * p7 + k.k_pump_nv0 * p6,
    ]
}

fn oracle_matrix(par: &NvParameters, k: &DrivingRates) -> [[f64; 7]; 7] {
    let mut m = [[0.0; 7]; 7];
    for j in 0..7 {
        let mut e = [0.0; 7];
        e[j] = 1.0;
        let col = rhs(par, k, &e);
        for i in 0..7 {
            m[i][j] = col[i];
        }
    }
    m
}

fn scale(m: &nvcav_core::RateMatrix) -> f64 {
    m.max_abs_entry()
}

#[test]
fn matrix_matches_transcribed_equations() {
    let par = default_parameters();
    let k = driving_rates(&par, 3.82e8, 1.024e9, &PhysicalConstants::CODATA);
    let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
    let o = oracle_matrix(&par, &k);
    let s = scale(&m);
    for i in 0..7 {
        for j in 0..7 {
            assert!(
                (m.m[(i, j)] - o[i][j]).abs() <= 1e-15 * s,
                "entry ({i},{j}): {} vs {}",
                m.m[(i, j)],
                o[i][j]
            );
        }
    }
}

#[test]
fn residual_matches_direct_product() {
    let par = default_parameters();
    let k = driving_rates_from_powers(&par, &CavityGeometry::default(), 20e-3, 5e-3);
    let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
    let p = Populations::new([0.31, 0.12, 0.02, 0.05, 0.2, 0.25, 0.05]).unwrap();
    let r = residual(&m, &p);
    let direct = rhs(&par, &k, p.as_array());
    for i in 0..7 {
        assert!((r[i] - direct[i]).abs() <= 1e-15 * scale(&m), "{i}");
    }
}

#[test]
fn dark_decay_branches_into_ground_states() {
    let par = default_parameters();
    let m = build_rate_matrix(&par, &DrivingRates::default(), Variant::Full).unwrap();
    // 3 -> 1 directly, or 3 -> 5 -> {1, 2} with singlet branching r51 : r52.
    let direct = par.r31 / (par.r31 + par.r35);
    let via_singlet = par.r35 / (par.r31 + par.r35);
    let to1 = direct + via_singlet * par.r51 / (par.r51 + par.r52);
    let to2 = via_singlet * par.r52 / (par.r51 + par.r52);
    // singlet lifetime ~0.6 µs; 50 µs is > 80 lifetimes
    let p = evolve(&m, &Populations::pure(Level::L3), 50e-6).unwrap();
    assert!((p.get(Level::L1) - to1).abs() < 1e-9, "{}", p.get(Level::L1));
    assert!((p.get(Level::L2) - to2).abs() < 1e-9, "{}", p.get(Level::L2));
    assert!(p.get(Level::L5).abs() < 1e-9);
}

#[test]
fn steady_state_agrees_with_long_evolution() {
    let par = default_parameters();
    let k = driving_rates_from_powers(&par, &CavityGeometry::default(), 50e-3, 67e-6);
    let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
    let ss = steady_state(&m, 1e-12).unwrap();
    let ev = evolve(&m, &Populations::pure(Level::L1), 10e-3).unwrap();
    for l in Level::ALL {
        assert!((ss.get(l) - ev.get(l)).abs() < 1e-8, "{l:?}: {} vs {}", ss.get(l), ev.get(l));
    }
}

#[test]
fn trajectory_conserves_total_population() {
    let par = default_parameters();
    let k = driving_rates_from_powers(&par, &CavityGeometry::default(), 100e-3, 47e-3);
    let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
    let mut worst = 0.0f64;
    let mut min_component = 0.0f64;
    Integrator::default()
        .integrate(&m, &Populations::uniform(), 1e-3, |_, p| {
            worst = worst.max((p.sum() - 1.0).abs());
            min_component = min_component.min(p.as_array().iter().cloned().fold(0.0, f64::min));
        })
        .unwrap();
    assert!(worst < 1e-9, "{worst}");
    assert!(min_component > -1e-9, "{min_component}");
}

#[test]
fn variant_consistency_without_charge_switching() {
    let par = NvParameters {
        sigma_i_g: 0.0,
        sigma_i_r: 0.0,
        sigma_i_s: 0.0,
        sigma_r_g: 0.0,
        sigma_r_r: 0.0,
        ..default_parameters()
    };
    let k = driving_rates_from_powers(&par, &CavityGeometry::default(), 40e-3, 1e-3);
    let full = build_rate_matrix(&par, &k, Variant::Full).unwrap();
    let minus = build_rate_matrix(&par, &k, Variant::NvMinusOnly).unwrap();
    let p0 = Populations::new([0.4, 0.3, 0.1, 0.1, 0.1, 0.0, 0.0]).unwrap();
    let a = evolve(&full, &p0, 1e-4).unwrap();
    let b = evolve(&minus, &p0, 1e-4).unwrap();
    assert_eq!(a, b);
    // restricted to levels 1-5 the two matrices are identical
    for i in 0..5 {
        for j in 0..5 {
            assert_eq!(full.m[(i, j)], minus.m[(i, j)]);
        }
    }
}

fn arb_params() -> impl Strategy<Value = NvParameters> {
    prop::collection::vec(0.5f64..2.0, 20).prop_map(|f| {
        let b = default_parameters();
        NvParameters {
            r31: b.r31 * f[0],
            r42: b.r42 * f[1],
            r35: b.r35 * f[2],
            r45: b.r45 * f[3],
            r51: b.r51 * f[4],
            r52: b.r52 * f[5],
            r76: b.r76 * f[6],
            sigma_g: b.sigma_g * f[7],
            sigma_r: b.sigma_r * f[8],
            sigma_se: b.sigma_se * f[9],
            sigma_i_g: b.sigma_i_g * f[10],
            sigma_i_r: b.sigma_i_r * f[11],
            sigma_i_s: b.sigma_i_s * f[12],
            sigma_r_g: b.sigma_r_g * f[13],
            sigma_r_r: b.sigma_r_r * f[14],
            xi: b.xi * f[15],
            eta: (b.eta * f[16]).min(1.0),
            beta: b.beta * f[17],
            ..b
        }
    })
}

fn arb_simplex() -> impl Strategy<Value = Populations> {
    prop::collection::vec(0.0f64..1.0, 7).prop_filter_map("non-zero", |v| {
        let s: f64 = v.iter().sum();
        if s <= 1e-6 {
            return None;
        }
        let mut a = [0.0; 7];
        for (x, y) in a.iter_mut().zip(&v) {
            *x = y / s;
        }
        Populations::new(a).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn columns_sum_to_zero(par in arb_params(), ig in 0.0f64..1e9, ir in 0.0f64..1e12) {
        let k = driving_rates(&par, ig, ir, &PhysicalConstants::CODATA);
        let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
        for s in m.column_sums() {
            prop_assert!(s.abs() <= 1e-15 * m.max_abs_entry());
        }
        let m = build_rate_matrix(&par, &k, Variant::NvMinusOnly).unwrap();
        for s in m.column_sums() {
            prop_assert!(s.abs() <= 1e-15 * m.max_abs_entry());
        }
    }

    #[test]
    fn matrix_sign_structure(par in arb_params(), ig in 0.0f64..1e9, ir in 0.0f64..1e12) {
        let k = driving_rates(&par, ig, ir, &PhysicalConstants::CODATA);
        let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                if i == j {
                    prop_assert!(m.m[(i, j)] <= 0.0);
                } else {
                    prop_assert!(m.m[(i, j)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn transcribed_rhs_sums_to_zero(par in arb_params(), ig in 0.0f64..1e9, ir in 0.0f64..1e12, p in arb_simplex()) {
        let k = driving_rates(&par, ig, ir, &PhysicalConstants::CODATA);
        let d = rhs(&par, &k, p.as_array());
        let sc = d.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1.0);
        prop_assert!(d.iter().sum::<f64>().abs() <= 1e-14 * sc);
    }

    #[test]
    fn evolution_stays_on_simplex(green in 1e-3f64..0.15, red in 0.0f64..0.05, p0 in arb_simplex()) {
        let par = default_parameters();
        let k = driving_rates_from_powers(&par, &CavityGeometry::default(), green, red);
        let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
        let mut ok = true;
        Integrator::default().integrate(&m, &p0, 1e-4, |_, p| {
            ok &= (p.sum() - 1.0).abs() < 1e-9;
            ok &= p.as_array().iter().all(|&x| x > -1e-9);
        }).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn pumped_steady_state_is_unique(green in 1e-3f64..0.15, red in 0.0f64..0.05) {
        let par = default_parameters();
        let k = driving_rates_from_powers(&par, &CavityGeometry::default(), green, red);
        let m = build_rate_matrix(&par, &k, Variant::Full).unwrap();
        prop_assert_eq!(m.closed_classes().len(), 1);
        let p = steady_state(&m, 1e-12).unwrap();
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
    }
}
