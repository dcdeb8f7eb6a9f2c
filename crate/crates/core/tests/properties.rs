use std::path::Path;

use bidomain::certificate::derive_certificate;
use bidomain::conductivity::{ConductivityField, Tensor2};
use bidomain::config::RunConfig;
use bidomain::eigenbasis::compute_eigenbasis;
use bidomain::estimates::{a_priori_radius_with, EnergyConstants};
use bidomain::grid::build_grid;
use bidomain::ionic::IonicModel;
use bidomain::operators::BidomainOperator;
use proptest::prelude::*;

fn field_2d(nx: usize, ny: usize, seeds: &[f64]) -> (bidomain::grid::Grid, ConductivityField) {
    let g = build_grid(&[1.0, 0.7], &[nx, ny]).unwrap();
    let tensor = |i: usize, shift: usize| {
        let s = seeds[(i + shift) % seeds.len()];
        let off = if g.is_boundary(i) { 0.0 } else { 0.3 * (s - 1.5) };
        Tensor2::symmetric(s, off, 2.5 - 0.5 * s)
    };
    let si = (0..g.len()).map(|i| tensor(i, 0)).collect();
    let se = (0..g.len()).map(|i| tensor(i, 3)).collect();
    let f = ConductivityField::new(&g, si, se, None).unwrap();
    (g, f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bidomain_form_is_symmetric_psd_with_constant_kernel(
        nx in 3usize..9,
        ny in 3usize..9,
        seeds in proptest::collection::vec(1.0f64..2.0, 4..12),
        u in proptest::collection::vec(-1.0f64..1.0, 81),
        v in proptest::collection::vec(-1.0f64..1.0, 81),
    ) {
        let (g, f) = field_2d(nx, ny, &seeds);
        let op = BidomainOperator::new(&g, &f).unwrap();
        let (u, v) = (&u[..g.len()], &v[..g.len()]);
        let scale = 1.0 + op.form(u, u).abs() + op.form(v, v).abs();
        prop_assert!((op.form(u, v) - op.form(v, u)).abs() <= 1e-10 * scale);
        prop_assert!(op.form(u, u) >= -1e-10 * scale);
        let ones = vec![1.0; g.len()];
        prop_assert!(op.form_apply(&ones).iter().all(|x| x.abs() <= 1e-10 * scale));
    }

    #[test]
    fn eigenbasis_is_mass_orthonormal(n in 5usize..40, si in 0.5f64..3.0, se in 0.5f64..3.0) {
        let g = build_grid(&[1.0], &[n]).unwrap();
        let f = ConductivityField::constant(&g, Tensor2::isotropic(si), Tensor2::isotropic(se)).unwrap();
        let op = BidomainOperator::new(&g, &f).unwrap();
        let b = compute_eigenbasis(&op, n - 1).unwrap();
        prop_assert!(b.orthonormality_defect() <= 1e-8);
        prop_assert!(b.eigenvalues[0].abs() <= 1e-8 * (1.0 + b.eigenvalues[n - 1]));
        prop_assert!(b.eigenvalues.windows(2).all(|w| w[0] <= w[1] + 1e-9));
        let coeffs: Vec<f64> = (0..n).map(|j| (j as f64).sin()).collect();
        let back = b.project(&b.reconstruct(&coeffs));
        prop_assert!(back.iter().zip(&coeffs).all(|(a, c)| (a - c).abs() < 1e-9));
    }

    #[test]
    fn certificate_margin_nonnegative(
        a in 0.01f64..0.99,
        k in 0.1f64..4.0,
        eps in 0.001f64..0.5,
        extra in 0.1f64..6.0,
        d in 0.0f64..1.0,
        u in -200.0f64..200.0,
        w in -200.0f64..200.0,
        which in 0usize..3,
    ) {
        let m = match which {
            0 => IonicModel::fitzhugh_nagumo(a, k, eps),
            1 => IonicModel::rogers_mcculloch(a, extra, k, eps),
            _ => IonicModel::aliev_panfilov(a, k + extra, k, eps, d),
        };
        let cert = derive_certificate(&m).unwrap();
        prop_assert!(cert.c1 > 0.0 && cert.c2 > 0.0 && cert.r > 0.0);
        let mag = 1.0 + cert.c0.abs() + cert.c1 * u.powi(4) + cert.c2 * w * w;
        prop_assert!(cert.margin(&m, u, w) >= -1e-12 * mag);
    }

    #[test]
    fn radius_grows_with_forcing(c21 in 0.01f64..2.0, c22 in 0.1f64..5.0, c23 in 0.0f64..10.0, amp in 0.0f64..3.0) {
        let c = EnergyConstants { r: 1.0, c21, c22, c23 };
        let shape = |scale: f64| move |t: f64| scale * (1.0 + (t * 0.7).sin().powi(2));
        let r1 = a_priori_radius_with(shape(amp), 9.0, &c).unwrap();
        let r2 = a_priori_radius_with(shape(amp + 0.5), 9.0, &c).unwrap();
        prop_assert!(r2 >= r1);
        prop_assert!(r1 * r1 >= c23 / c21 * (1.0 - 1e-10));
    }

    #[test]
    fn config_echo_round_trips(
        counts in 3usize..200,
        a in 0.01f64..0.99,
        eps in 0.001f64..1.0,
        period in 0.1f64..100.0,
        amp in -1.0f64..1.0,
        tol in 1e-14f64..1e-4,
        shape in 0usize..4,
        profile in 0usize..4,
    ) {
        let shape = ["sin", "cos", "square", "constant"][shape];
        let profile = ["none", "constant", "cosine\nwavenumber = 3", "mode\nmode = 2"][profile];
        let text = format!(
            "[grid]\nextents = 2.5\ncounts = {counts}\n[model]\nvariant = fhn\na = {a}\nk = 1\neps = {eps}\n\
             [forcing]\nperiod = {period}\namplitude = {amp}\nshape = {shape}\nprofile = {profile}\n[solver]\ntol = {tol}\n"
        );
        let cfg = RunConfig::parse_str(&text, Path::new("")).unwrap();
        prop_assert_eq!(RunConfig::parse_str(&cfg.to_ini(), Path::new("")).unwrap(), cfg);
    }
}
