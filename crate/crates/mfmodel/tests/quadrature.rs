use mfmodel::quadrature::{
    gaussian_partial_moment, integrate_grid_function, integrate_max, integrate_with_kink, neville_coeffs, poly_eval,
    PiecewisePoly, QuadratureError, TransitionKernel,
};
use proptest::prelude::*;

fn pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (-0.5 * ((x - mu) / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Composite Gauss-Legendre (5 points) on `n` panels.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let nodes = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    let weights =
        [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
    let h = (b - a) / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let c = a + (i as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            s += w * f(c + 0.5 * h * x);
        }
    }
    s * 0.5 * h
}

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

#[test]
fn neville_examples() {
    let xs = [0.3, 1.1, 2.0];
    let fs: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let c = neville_coeffs(&xs, &fs).unwrap();
    for (got, want) in c.iter().zip([0.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(neville_coeffs(&[0.7], &[2.5]).unwrap(), vec![2.5]);
    assert!(matches!(neville_coeffs(&[1.0, 1.0], &[0.0, 1.0]), Err(QuadratureError::DuplicateAbscissae)));
}

#[test]
fn gaussian_moment_examples() {
    assert!((gaussian_partial_moment(0, 1.3f64, 1.3, 0.7).unwrap() - 0.5).abs() < 1e-15);
    assert!((gaussian_partial_moment(1, 2.0f64 + 40.0 * 0.5, 2.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(gaussian_partial_moment(-1, 0.3f64, 0.0, 1.0).unwrap(), 0.0);
    assert!(gaussian_partial_moment(2, 0.0f64, 0.0, 0.0).is_err());
    for k in 0..=6 {
        for &(h, mu, sigma) in &[(0.5, 0.0, 1.0), (-1.0, 0.3, 0.8), (3.0, 2.0, 1.5)] {
            let g = gaussian_partial_moment(k, h, mu, sigma).unwrap();
            let q = gauss_legendre(|x| x.powi(k) * pdf(x, mu, sigma), mu - 40.0 * sigma, h, 4000);
            assert!((g - q).abs() < 1e-10, "k={k} h={h}: {g} vs {q}");
        }
    }
}

#[test]
fn moment_recurrence_is_stable() {
    for &ratio in &[0.1, 0.5, 1.0, 3.0, 10.0] {
        let sigma = 0.6;
        let mu = ratio * sigma;
        for i in 0..=16 {
            let h = mu + (-8.0 + i as f64) * sigma;
            for k in 0..=8 {
                let g = gaussian_partial_moment(k, h, mu, sigma).unwrap();
                let q = gauss_legendre(|x| x.powi(k) * pdf(x, mu, sigma), mu - 40.0 * sigma, h, 4000);
                assert!((g - q).abs() < 1e-9 * q.abs().max(1.0), "k={k} mu={mu} h={h}");
            }
        }
    }
}

#[test]
fn grid_function_examples() {
    let x = grid(-10.0, 10.0, 200);
    let ones = vec![1.0; x.len()];
    assert!((integrate_grid_function(&x, &ones, 0.0, 1.0, 3).unwrap() - 1.0).abs() < 1e-8);
    let odd = integrate_grid_function(&x, &x, 0.0, 1.0, 3).unwrap();
    assert!(odd.abs() < 1e-10);
    let fine = grid(-10.0, 10.0, 400);
    let f: Vec<f64> = fine.iter().map(|v| (0.3 * v).exp()).collect();
    let got = integrate_grid_function(&fine, &f, 0.0, 1.0, 3).unwrap();
    let oracle = trapezoid(|v| (0.3 * v).exp() * pdf(v, 0.0, 1.0), -10.0, 10.0, 1_000_000);
    assert!((got / oracle - 1.0).abs() < 1e-8, "{got} vs {oracle}");
    assert!(matches!(integrate_grid_function(&x[..3], &x[..3], 0.0, 1.0, 3), Err(QuadratureError::TooFewPoints { .. })));
}

#[test]
fn polynomials_up_to_order_are_exact() {
    let x = grid(-6.0, 7.0, 130);
    let (mu, sigma) = (0.4, 1.1);
    for order in 0..=4usize {
        for deg in 0..=order {
            let f: Vec<f64> = x.iter().map(|v| v.powi(deg as i32)).collect();
            let got = integrate_grid_function(&x, &f, mu, sigma, order).unwrap();
            // the constant tails beyond the grid match x^deg only approximately, so compare against the same split
            let inside = gaussian_partial_moment(deg as i32, x[x.len() - 1], mu, sigma).unwrap()
                - gaussian_partial_moment(deg as i32, x[0], mu, sigma).unwrap();
            let tails = f[0] * gaussian_partial_moment(0, x[0], mu, sigma).unwrap()
                + f[f.len() - 1] * (1.0 - gaussian_partial_moment(0, x[x.len() - 1], mu, sigma).unwrap());
            let want = inside + tails;
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "order {order} degree {deg}");
        }
    }
}

#[test]
fn kink_examples() {
    let x = grid(-10.0, 10.0, 200);
    let zero = vec![0.0; x.len()];
    let half_normal = integrate_with_kink(&x, &zero, &x, 0.0, 0.0, 1.0, 3).unwrap();
    assert!((half_normal - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-8);
    // crossover at a node agrees with plain integration of the piecewise function
    let maxed: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let plain = integrate_grid_function(&x, &maxed, 0.0, 1.0, 1).unwrap();
    let split = integrate_with_kink(&x, &zero, &x, 0.0, 0.0, 1.0, 1).unwrap();
    assert!((plain - split).abs() < 1e-12);
    let f: Vec<f64> = x.iter().map(|v| (0.2 * v).sin()).collect();
    let same = integrate_with_kink(&x, &f, &f, 1.234, 0.1, 0.9, 3).unwrap();
    assert!((same - integrate_grid_function(&x, &f, 0.1, 0.9, 3).unwrap()).abs() < 1e-14);
    assert!(matches!(integrate_with_kink(&x, &f, &f, 11.0, 0.0, 1.0, 3), Err(QuadratureError::CrossoverOutsideGrid(_))));
}

#[test]
fn kink_splitting_beats_naive_fit() {
    let x = grid(-10.0, 10.0, 100);
    let a = 0.37;
    let exact = {
        let phi = pdf(a, 0.0, 1.0);
        phi - a * (1.0 - gaussian_partial_moment(0, a, 0.0, 1.0).unwrap())
    };
    let maxed: Vec<f64> = x.iter().map(|v| (v - a).max(0.0)).collect();
    let naive = (integrate_grid_function(&x, &maxed, 0.0, 1.0, 3).unwrap() - exact).abs();
    let zero = vec![0.0; x.len()];
    let line: Vec<f64> = x.iter().map(|v| v - a).collect();
    let split = (integrate_with_kink(&x, &zero, &line, a, 0.0, 1.0, 3).unwrap() - exact).abs();
    let located = (integrate_max(&x, &zero, &line, 0.0, 1.0, 3).unwrap() - exact).abs();
    assert!(split < 0.1 * naive, "split {split} naive {naive}");
    assert!(located < 0.1 * naive, "located {located} naive {naive}");
}

#[test]
fn transition_kernel_matches_direct_integration() {
    let x = grid(-5.0, 5.0, 60);
    let targets = [-1.0, 0.0, 0.4, 2.5];
    let f: Vec<f64> = x.iter().map(|v| (0.5 * v).exp()).collect();
    let k = TransitionKernel::new(&x, &targets, 0.8, 3).unwrap();
    let got = k.expect_values(&f).unwrap();
    for (t, g) in targets.iter().zip(&got) {
        assert!((g - integrate_grid_function(&x, &f, *t, 0.8, 3).unwrap()).abs() < 1e-13);
    }
}

proptest! {
    #[test]
    fn neville_recovers_cubics(c in prop::array::uniform4(-5.0f64..5.0), x0 in -3.0f64..3.0, gaps in prop::array::uniform3(0.1f64..2.0)) {
        let xs = [x0, x0 + gaps[0], x0 + gaps[0] + gaps[1], x0 + gaps[0] + gaps[1] + gaps[2]];
        let fs: Vec<f64> = xs.iter().map(|&v| poly_eval(&c, v)).collect();
        let got = neville_coeffs(&xs, &fs).unwrap();
        for (g, w) in got.iter().zip(&c) {
            prop_assert!((g - w).abs() < 1e-10 * (1.0 + x0.abs()).powi(3));
        }
    }

    #[test]
    fn piecewise_fit_interpolates_nodes(seed in prop::collection::vec(-1.0f64..1.0, 12), order in 1usize..=4) {
        let x = grid(-2.0, 2.0, 11);
        let p = PiecewisePoly::fit(&x, &seed, order).unwrap();
        for (xi, fi) in x.iter().zip(&seed) {
            prop_assert!((p.eval(*xi) - fi).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_moment_monotone_in_h(h in -6.0f64..6.0, dh in 0.0f64..1.0, mu in -2.0f64..2.0, sigma in 0.1f64..3.0) {
        let g0 = gaussian_partial_moment(0, h, mu, sigma).unwrap();
        let g1 = gaussian_partial_moment(0, h + dh, mu, sigma).unwrap();
        prop_assert!((0.0..=1.0).contains(&g0) && g1 >= g0);
    }
}
