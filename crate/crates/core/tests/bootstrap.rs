use lvasym::bootstrap::{bootstrap_solve, BootstrapConfig, FirstHop};
use lvasym::oracles::{bs_exact, cn_solve, hagan_woodward_price, CNConfig};
use lvasym::pricing::{price_call_cev_closed, price_call_closed, price_closed, Payoff, PriceCurve};
use lvasym::{BasepointRule, CoefficientJet, KernelSpec, Model, SpatialGrid};

const SIGMA: f64 = 0.5;
const R: f64 = 0.1;
const K: f64 = 20.0;

fn config(order: u8, t: f64, n: usize, x_max: f64) -> BootstrapConfig {
    let spec = KernelSpec::new(Model::bsm(SIGMA, R).unwrap(), order, BasepointRule::AtX).unwrap();
    BootstrapConfig::new(spec, t, n, SpatialGrid::half_line(x_max, 0.1).unwrap()).unwrap()
}

fn bs_error(curve: &PriceCurve, t: f64, payoff: &Payoff) -> f64 {
    let legs = payoff.call_legs().unwrap();
    curve.max_abs_error(0.0, 40.0, |x| {
        legs.iter().map(|&(w, k)| w * bs_exact(t, k, x, SIGMA, R).unwrap()).sum()
    })
}

fn direct_error(order: u8, t: f64, payoff: &Payoff) -> f64 {
    let model = Model::bsm(SIGMA, R).unwrap();
    let legs = payoff.call_legs().unwrap();
    (1..=400)
        .map(|i| 0.1 * i as f64)
        .map(|x| {
            let exact: f64 = legs.iter().map(|&(w, k)| w * bs_exact(t, k, x, SIGMA, R).unwrap()).sum();
            (price_closed(order, &model, t, payoff, x).unwrap() - exact).abs()
        })
        .fold(0.0, f64::max)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn order_zero_semigroup() {
    // frozen coefficients make the order-0 kernel an exact Gaussian
    let a = 3.0;
    let frozen = Model::custom("frozen", move |_| CoefficientJet {
        a,
        da_dx: 0.0,
        d2a_dx2: 0.0,
        da_dt: 0.0,
        b: 0.0,
        db_dx: 0.0,
        c: 0.0,
    });
    let spec = KernelSpec::new(frozen, 0, BasepointRule::AtX).unwrap();
    let grid = SpatialGrid::new(4.0, 60.0, 0.05).unwrap();
    let payoff = Payoff::call(K).unwrap();
    let t = 0.5;
    let one = bootstrap_solve(&BootstrapConfig::new(spec.clone(), t, 1, grid).unwrap(), &payoff).unwrap();
    let two = bootstrap_solve(&BootstrapConfig::new(spec, t, 2, grid).unwrap(), &payoff).unwrap();
    let s = a * f64::sqrt(t);
    for ((x, u1), u2) in one.iter().zip(two.value.iter()) {
        if !(10.0..=30.0).contains(&x) {
            continue;
        }
        let d = (x - K) / s;
        let bachelier = s * (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt() + (x - K) * normal_cdf(d);
        assert!((u1 - u2).abs() < 1e-7, "x={x}: {u1} vs {u2}");
        assert!((u1 - bachelier).abs() < 1e-7, "x={x}: {u1} vs {bachelier}");
    }
}

#[test]
fn error_scales_with_inverse_root_of_steps() {
    let payoff = Payoff::call(K).unwrap();
    let coarse = bs_error(&bootstrap_solve(&config(2, 1.0, 10, 400.0), &payoff).unwrap(), 1.0, &payoff);
    let fine = bs_error(&bootstrap_solve(&config(2, 1.0, 40, 400.0), &payoff).unwrap(), 1.0, &payoff);
    let ratio = coarse / fine;
    assert!((1.6..=2.6).contains(&ratio), "10 steps {coarse:.3e}, 40 steps {fine:.3e}, ratio {ratio:.2}");
}

#[test]
fn butterfly_oscillation_is_damped() {
    let fly = Payoff::butterfly(15.0, K, 25.0).unwrap();
    let boot = bs_error(&bootstrap_solve(&config(2, 1.0, 10, 200.0), &fly).unwrap(), 1.0, &fly);
    let direct = direct_error(2, 1.0, &fly);
    assert_eq!(boot.log10().floor(), -3.0, "bootstrap {boot:.3e}");
    assert_eq!(direct.log10().floor(), -2.0, "direct {direct:.3e}");
}

#[test]
fn wider_truncation_removes_edge_error() {
    let payoff = Payoff::call(K).unwrap();
    let at_39 = |x_max: f64| {
        let curve = bootstrap_solve(&config(2, 1.0, 10, x_max), &payoff).unwrap();
        let i = curve.x.iter().position(|&x| (x - 39.0).abs() < 1e-9).unwrap();
        (curve.value[i] - bs_exact(1.0, K, 39.0, SIGMA, R).unwrap()).abs()
    };
    let (near, far) = (at_39(200.0), at_39(400.0));
    assert!(far < near, "x_max 400: {far:.3e}, x_max 200: {near:.3e}");
}

#[test]
fn first_order_bootstrap_does_not_help() {
    let payoff = Payoff::call(K).unwrap();
    let boot = bs_error(&bootstrap_solve(&config(1, 1.0, 10, 200.0), &payoff).unwrap(), 1.0, &payoff);
    let direct = direct_error(1, 1.0, &payoff);
    assert!(boot >= direct / 2.0, "bootstrap {boot:.3e}, direct {direct:.3e}");
}

#[test]
fn shorter_maturity_is_more_accurate() {
    let payoff = Payoff::call(K).unwrap();
    let err = |t| bs_error(&bootstrap_solve(&config(2, t, 10, 200.0), &payoff).unwrap(), t, &payoff);
    let (short, long) = (err(0.1), err(1.0));
    assert!(short < long, "{short:.3e} vs {long:.3e}");
}

#[test]
fn independent_of_thread_count() {
    let payoff = Payoff::butterfly(15.0, K, 25.0).unwrap();
    let cfg = config(2, 0.5, 5, 100.0).with_first_hop(FirstHop::Quadrature);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_solve(&cfg, &payoff).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        let other = run(threads);
        assert!(one.value.iter().zip(&other.value).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

fn cn_at(model: &Model, grid: SpatialGrid, dt: f64, t: f64, k: f64) -> PriceCurve {
    cn_solve(model, &CNConfig::new(grid, dt, t).unwrap(), &Payoff::call(k).unwrap()).unwrap()
}

#[test]
fn black_scholes_agrees_with_fine_crank_nicolson() {
    let model = Model::bsm(0.3, 0.0).unwrap();
    let curve = cn_at(&model, SpatialGrid::half_line(60.0, 0.005).unwrap(), 1e-5, 0.1, 15.0);
    let i = curve.x.iter().position(|&x| (x - 15.0).abs() < 1e-9).unwrap();
    let exact = bs_exact(0.1, 15.0, 15.0, 0.3, 0.0).unwrap();
    assert!((curve.value[i] - exact).abs() < 1e-5, "{} vs {exact}", curve.value[i]);
}

#[test]
fn cev_closed_form_near_strike() {
    let (sigma, beta, r, t, k) = (0.3, 2.0 / 3.0, 0.1, 0.1, 15.0);
    let model = Model::cev(sigma, beta, r).unwrap();
    let curve = cn_at(&model, SpatialGrid::half_line(60.0, 0.01).unwrap(), 1e-4, t, k);
    let worst = curve
        .iter()
        .filter(|&(x, _)| (14.0..=16.0).contains(&x))
        .map(|(x, v)| (price_call_cev_closed(t, k, x, sigma, beta, r).unwrap() - v).abs())
        .fold(0.0, f64::max);
    assert!(worst < 5e-3, "{worst:.3e}");
}

#[test]
fn hagan_woodward_near_strike() {
    let (sigma, beta, r, t, k) = (0.3, 2.0 / 3.0, 0.1, 0.3, 20.0);
    let model = Model::cev(sigma, beta, r).unwrap();
    let curve = cn_at(&model, SpatialGrid::half_line(80.0, 0.01).unwrap(), 1e-4, t, k);
    for (x, v) in curve.iter().filter(|&(x, _)| (18.0..=22.0).contains(&x)) {
        let hw = hagan_woodward_price(t, k, x, sigma, beta, r).unwrap();
        assert!((hw - v).abs() < 1e-2, "x={x}: {hw} vs {v}");
        let ours = price_call_closed(2, &model, t, k, x).unwrap();
        assert!((ours - v).abs() < 1e-1, "x={x}: {ours} vs {v}");
    }
}
