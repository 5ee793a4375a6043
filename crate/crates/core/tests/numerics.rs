//! Special functions, fitted densities and the likelihood machinery against
//! analytic values, finite differences and quadrature.

mod common;

use common::{fitted_models, score_fd_error, score_points, total_mass};
use parconf::glm::{fit_mle, score, Dataset, Link, ModelParams, ModelSpec};
use parconf::special::{ln_gamma, regularized_lower_gamma, regularized_upper_gamma};
use parconf::Error;
use proptest::prelude::*;

fn fit(spec: ModelSpec, data: &Dataset) -> parconf::glm::FittedModel {
    fit_mle(&spec, &data.design(&spec).unwrap(), data.response(), None).unwrap()
}

#[test]
fn lower_gamma_analytic_identities() {
    assert!((regularized_lower_gamma(1.0, 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert!((regularized_lower_gamma(2.0, 2.0) - (1.0 - 3.0 * (-2.0f64).exp())).abs() < 1e-12);
    assert!((regularized_lower_gamma(1.0, 1.0) - 0.6321205588).abs() < 1e-10);
    assert!((regularized_lower_gamma(2.0, 2.0) - 0.5939941503).abs() < 1e-10);
    for s in [0.3, 1.0, 7.5, 120.0] {
        assert_eq!(regularized_lower_gamma(s, 0.0), 0.0);
    }
    // P(n, x) = 1 - e^-x sum_{k<n} x^k / k!
    for n in 1..8 {
        for &x in &[0.2, 1.0, 3.7, 9.0, 25.0] {
            let mut term = 1.0;
            let mut sum = 1.0;
            for k in 1..n {
                term *= x / k as f64;
                sum += term;
            }
            let exact = 1.0 - (-x).exp() * sum;
            let got = regularized_lower_gamma(n as f64, x);
            assert!(
                (got - exact).abs() < 1e-12,
                "P({n}, {x}) = {got}, want {exact}"
            );
        }
    }
    // P(1/2, x) = erf(sqrt x), reference values from a 30-digit evaluation
    for &(x, exact) in &[
        (0.01, 0.1124629160182849),
        (0.5, 0.6826894921370859),
        (2.0, 0.9544997361036416),
        (8.0, 0.9999366575163338),
    ] {
        let got = regularized_lower_gamma(0.5, x);
        assert!(
            (got - exact).abs() < 1e-12,
            "P(0.5, {x}) = {got}, want {exact}"
        );
    }
}

#[test]
fn log_gamma_known_values() {
    assert!(ln_gamma(1.0).abs() < 1e-14);
    assert!(ln_gamma(2.0).abs() < 1e-14);
    assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
    assert!((ln_gamma(10.0) - 362880f64.ln()).abs() < 1e-12);
}

#[test]
fn point_density_examples() {
    let exp = parconf::glm::Conditional::gamma(1.0, 1.0).unwrap();
    assert!((exp.ln_pdf(2.0) + 2.0).abs() < 1e-12);
    assert!((exp.cdf(1.0) - 0.6321205588).abs() < 1e-10);
    assert!((exp.quantile(0.9).unwrap() - 10f64.ln()).abs() < 1e-9);
    let g = parconf::glm::Conditional::gamma(2.0, 1.0).unwrap();
    assert!((g.ln_pdf(0.5) + 0.3068528194).abs() < 1e-9);
    assert!(
        (parconf::glm::Conditional::gamma(2.0, 2.0).unwrap().cdf(2.0) - 0.5939941503).abs() < 1e-10
    );
    assert_eq!(g.cdf(-1.0), 0.0);
    assert_eq!(g.ln_pdf(0.0), f64::NEG_INFINITY);
    let z = parconf::glm::Conditional::normal(0.0, 1.0).unwrap();
    assert!((z.ln_pdf(0.0) + 0.9189385332).abs() < 1e-10);
    assert_eq!(z.cdf(0.0), 0.5);
    assert!(z.quantile(0.5).unwrap().abs() < 1e-12);
    assert!((z.quantile(0.95).unwrap() - 1.644853627).abs() < 1e-6);
}

#[test]
fn cdf_inverts_quantile() {
    for (model, _) in fitted_models() {
        for x in [0.1, 0.5, 0.9] {
            for p in [0.01, 0.1, 0.5, 0.9, 0.99] {
                let y = model.quantile(p, &[x]).unwrap();
                let back = model.cdf(y, &[x]).unwrap();
                assert!(
                    (back - p).abs() < 1e-8,
                    "{}: p {p} back {back}",
                    model.spec()
                );
            }
        }
    }
}

#[test]
fn cdf_is_nondecreasing_on_a_fine_grid() {
    for (model, _) in fitted_models() {
        let x = [0.4];
        let lo = model.quantile(1e-6, &x).unwrap();
        let hi = model.quantile(1.0 - 1e-6, &x).unwrap();
        let mut prev = 0.0;
        for k in 0..1000 {
            let y = lo + (hi - lo) * k as f64 / 999.0;
            let c = model.cdf(y, &x).unwrap();
            assert!(c >= prev, "{}: cdf drops at {y}", model.spec());
            prev = c;
        }
    }
}

#[test]
fn fitted_densities_integrate_to_one() {
    for (model, _) in fitted_models() {
        for x in [0.0, 0.3, 0.7, 1.0] {
            let mass = total_mass(&model.conditional(&[x]).unwrap());
            assert!(
                (mass - 1.0).abs() < 1e-6,
                "{} at {x}: mass {mass}",
                model.spec()
            );
        }
    }
}

#[test]
fn score_matches_finite_differences() {
    for (spec, data, params) in score_points() {
        let err = score_fd_error(spec, &data, &params);
        assert!(err < 1e-5, "{spec}: relative error {err}");
    }
}
#[test]
fn score_vanishes_at_the_mle() {
    for (model, data) in fitted_models() {
        let design = data.design(model.spec()).unwrap();
        let s = score(model.params(), model.spec(), &design, data.response()).unwrap();
        let max = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-8 * data.n() as f64, "{}: {max}", model.spec());
    }
}

#[test]
fn balanced_gaussian_score() {
    let data = Dataset::response_only(vec![1.0, -1.0]).unwrap();
    let spec = ModelSpec::gaussian(1).unwrap();
    let s = score(
        &ModelParams::new(vec![0.0], 1.0),
        &spec,
        &data.design(&spec).unwrap(),
        data.response(),
    )
    .unwrap();
    assert_eq!(s[0], 0.0);
}

#[test]
fn gamma_shape_matches_grid_search() {
    // responses with mean 1: the inverse-link intercept is exactly 1 and the
    // profile likelihood in the shape is one dimensional
    let ys = vec![0.5, 0.8, 1.2, 1.5];
    let data = Dataset::response_only(ys.clone()).unwrap();
    let model = fit(ModelSpec::gamma(Link::Inverse, 1).unwrap(), &data);
    assert!((model.beta()[0] - 1.0).abs() < 1e-9);

    let n = ys.len() as f64;
    let sum_log: f64 = ys.iter().map(|y| y.ln()).sum();
    let sum: f64 = ys.iter().sum();
    let profile = |nu: f64| n * (nu * nu.ln() - ln_gamma(nu)) + (nu - 1.0) * sum_log - nu * sum;
    // log-spaced coarse scan of (0.01, 100), then refine around the best cell
    let mut best = 0.01;
    let coarse = 20000;
    for k in 0..=coarse {
        let nu = 0.01 * 1e4f64.powf(k as f64 / coarse as f64);
        if profile(nu) > profile(best) {
            best = nu;
        }
    }
    let (a, b) = (best * 0.999, best * 1.001);
    for k in 0..=20000 {
        let nu = a + (b - a) * k as f64 / 20000.0;
        if profile(nu) > profile(best) {
            best = nu;
        }
    }
    assert!(
        (model.dispersion() - best).abs() < 1e-4,
        "{} vs {best}",
        model.dispersion()
    );
}

#[test]
fn constant_gamma_response_has_no_finite_shape() {
    // every response equal: the mean is exact but the likelihood keeps
    // increasing in the shape
    let data = Dataset::response_only(vec![1.0; 4]).unwrap();
    let spec = ModelSpec::gamma(Link::Inverse, 1).unwrap();
    match fit_mle(&spec, &data.design(&spec).unwrap(), data.response(), None) {
        Ok(model) => {
            assert!((model.beta()[0] - 1.0).abs() < 1e-6);
            assert!(!model.converged() || model.dispersion() > 1e3);
        }
        Err(e) => assert!(
            matches!(
                e,
                Error::Degenerate(_) | Error::NotConverged(_) | Error::Numeric(_)
            ),
            "{e}"
        ),
    }
}

#[test]
fn fit_is_invariant_to_row_order() {
    let order = [7, 2, 10, 0, 5, 9, 3, 8, 1, 6, 4];
    for (spec, data) in [
        (ModelSpec::gaussian(2).unwrap(), common::gaussian_data()),
        (
            ModelSpec::gamma(Link::Inverse, 1).unwrap(),
            common::gamma_data(),
        ),
        (
            ModelSpec::gamma(Link::Log, 1).unwrap(),
            common::gamma_data(),
        ),
    ] {
        let mut idx: Vec<usize> = order.iter().copied().filter(|&i| i < data.n()).collect();
        idx.extend(order.len()..data.n());
        let a = fit(spec, &data);
        let b = fit(spec, &data.permuted(&idx));
        for (u, v) in a.beta().iter().zip(b.beta()) {
            assert!((u - v).abs() < 1e-10, "{spec}: {u} vs {v}");
        }
        assert!((a.dispersion() - b.dispersion()).abs() < 1e-10 * a.dispersion().max(1.0));
    }
}

#[test]
fn warm_start_from_the_mle_is_a_fixed_point() {
    for (model, data) in fitted_models() {
        let design = data.design(model.spec()).unwrap();
        let again = fit_mle(model.spec(), &design, data.response(), Some(&model)).unwrap();
        assert!(again.iterations() <= 1);
        for (u, v) in model.beta().iter().zip(again.beta()) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!((model.dispersion() - again.dispersion()).abs() < 1e-10 * model.dispersion());
    }
}

proptest! {
    #[test]
    fn lower_and_upper_gamma_sum_to_one(s in 0.05f64..200.0, x in 0.0f64..400.0) {
        let p = regularized_lower_gamma(s, x);
        let q = regularized_upper_gamma(s, x);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_gamma_agrees_with_statrs(s in 0.1f64..50.0, x in 0.0f64..100.0) {
        let ours = regularized_lower_gamma(s, x);
        let theirs = statrs::function::gamma::gamma_lr(s, x);
        prop_assert!((ours - theirs).abs() < 1e-9, "P({}, {}) {} vs {}", s, x, ours, theirs);
    }

    #[test]
    fn gamma_quantile_round_trips(shape in 0.2f64..60.0, mean in 0.05f64..20.0, p in 0.001f64..0.999) {
        let cond = parconf::glm::Conditional::gamma(shape, mean).unwrap();
        let y = cond.quantile(p).unwrap();
        prop_assert!(y > 0.0);
        prop_assert!((cond.cdf(y) - p).abs() < 1e-9);
    }

    #[test]
    fn min_length_interval_has_mass_and_equal_heights(shape in 1.05f64..40.0, mean in 0.1f64..10.0, alpha in 0.02f64..0.5) {
        let cond = parconf::glm::Conditional::gamma(shape, mean).unwrap();
        let hd = cond.min_length_interval(alpha).unwrap();
        prop_assert!(hd.lower < hd.upper);
        prop_assert!((cond.cdf(hd.upper) - cond.cdf(hd.lower) - (1.0 - alpha)).abs() < 1e-8);
        let (fa, fb) = (cond.pdf(hd.lower), cond.pdf(hd.upper));
        prop_assert!((fa - fb).abs() < 1e-6 * fa.max(fb));
    }
}
