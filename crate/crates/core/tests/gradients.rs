use cs_sgld::generator::{ActivationKind, GeneratorNet, NetSpec};
use cs_sgld::loss::Problem;
use cs_sgld::numerics::{dot, RngStream, Vector};
use cs_sgld::sensing::sample_matrix;
use proptest::prelude::*;

const SMOOTH: [ActivationKind; 4] = [
    ActivationKind::Elu,
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
    ActivationKind::Identity,
];

fn net_strategy() -> impl Strategy<Value = GeneratorNet> {
    (1usize..=8, prop::collection::vec(1usize..=12, 0..=2), 1usize..=24, any::<u64>(), prop::collection::vec(0usize..4, 3))
        .prop_map(|(d, hidden, n, seed, acts)| {
            let mut widths = vec![d];
            widths.extend(hidden);
            widths.push(n);
            let layers = widths.len() - 1;
            NetSpec {
                activations: acts[..layers].iter().map(|&i| SMOOTH[i]).collect(),
                ..NetSpec::new(widths, ActivationKind::Elu).with_seed(seed)
            }
            .build()
            .unwrap()
        })
}

fn point(net: &GeneratorNet, seed: u64, salt: u64) -> Vec<f64> {
    RngStream::new(seed, salt).uniform_in_ball(net.input_dim(), net.radius())
}

fn gaussian(len: usize, seed: u64, salt: u64) -> Vec<f64> {
    let mut s = RngStream::new(seed, salt);
    (0..len).map(|_| s.normal()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jvp_and_vjp_are_adjoint(net in net_strategy(), seed in any::<u64>()) {
        let z = point(&net, seed, 1);
        let v = gaussian(net.input_dim(), seed, 2);
        let u = gaussian(net.output_dim(), seed, 3);
        let jv = net.jvp(&z, &v).unwrap();
        let jtu = net.vjp(&z, &u).unwrap();
        let lhs = dot(&jv, &u);
        let rhs = dot(&v, &jtu);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())), "{lhs} vs {rhs}");
    }

    #[test]
    fn jacobian_matches_central_differences(net in net_strategy(), seed in any::<u64>()) {
        let z = point(&net, seed, 1);
        let jac = net.jacobian(&z).unwrap();
        let h = 1e-6;
        for j in 0..net.input_dim() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let gp = net.forward(&zp).unwrap();
            let gm = net.forward(&zm).unwrap();
            for i in 0..net.output_dim() {
                let fd = (gp.as_slice()[i] - gm.as_slice()[i]) / (2.0 * h);
                prop_assert!((fd - jac.get(i, j)).abs() <= 1e-6 * (1.0 + jac.get(i, j).abs()));
            }
        }
    }

    #[test]
    fn jacobian_columns_are_jvps(net in net_strategy(), seed in any::<u64>()) {
        let z = point(&net, seed, 1);
        let jac = net.jacobian(&z).unwrap();
        let v = gaussian(net.input_dim(), seed, 2);
        let jv = net.jvp(&z, &v).unwrap();
        for i in 0..net.output_dim() {
            let direct: f64 = (0..net.input_dim()).map(|j| jac.get(i, j) * v[j]).sum();
            prop_assert!((direct - jv.as_slice()[i]).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn loss_gradient_matches_central_differences(net in net_strategy(), seed in any::<u64>(), m_frac in 0.1f64..=1.0) {
        let n = net.output_dim();
        let m = ((m_frac * n as f64).ceil() as usize).clamp(1, n);
        let a = sample_matrix(m, n, &mut RngStream::new(seed, 4)).unwrap();
        let y = Vector::new(gaussian(m, seed, 5)).unwrap();
        let z = point(&net, seed, 1);
        let problem = Problem::new(net, a, y).unwrap();
        let g = problem.grad(&z).unwrap();
        let mut err = 0.0;
        for j in 0..z.len() {
            let h = 1e-5 * z[j].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let fd = (problem.loss(&zp).unwrap() - problem.loss(&zm).unwrap()) / (2.0 * h);
            err += (fd - g.as_slice()[j]).powi(2);
        }
        prop_assert!(err.sqrt() <= 1e-5 * g.norm().max(1e-3), "err {} grad {}", err.sqrt(), g.norm());
    }

    #[test]
    fn loss_is_zero_exactly_at_noiseless_target(net in net_strategy(), seed in any::<u64>()) {
        let n = net.output_dim();
        let a = sample_matrix(n, n, &mut RngStream::new(seed, 4)).unwrap();
        let z_star = Vector::new(point(&net, seed, 6)).unwrap();
        let problem = Problem::from_latent(net, a, z_star.clone(), None).unwrap();
        prop_assert_eq!(problem.loss(z_star.as_slice()).unwrap(), 0.0);
        prop_assert!(problem.grad(z_star.as_slice()).unwrap().norm() == 0.0);
    }
}

#[test]
fn gradient_of_linear_generator_is_closed_form() {
    // F(z) = ‖y − A W z‖², ∇F = −2 Wᵀ Aᵀ (y − A W z)
    let w = cs_sgld::numerics::Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![-1.0, 0.5]]).unwrap();
    let a = cs_sgld::numerics::Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.5, -1.0, 2.0]]).unwrap();
    let net = GeneratorNet::linear(w.clone(), 10.0).unwrap();
    let y = vec![0.3, -0.7];
    let problem = Problem::new(net, cs_sgld::sensing::SensingMatrix::from_matrix(a.clone()), Vector::new(y.clone()).unwrap()).unwrap();
    let z = [0.4, -1.1];
    let aw = a.matmul(&w).unwrap();
    let r: Vec<f64> = (0..2).map(|i| y[i] - (0..2).map(|j| aw.get(i, j) * z[j]).sum::<f64>()).collect();
    let expected: Vec<f64> = (0..2).map(|j| -2.0 * (0..2).map(|i| aw.get(i, j) * r[i]).sum::<f64>()).collect();
    let g = problem.grad(&z).unwrap();
    for j in 0..2 {
        assert!((g.as_slice()[j] - expected[j]).abs() < 1e-13);
    }
    assert!((problem.loss(&z).unwrap() - r.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-13);
}
