//! Forward pass and Jacobian layout against hand-unrolled formulas.

use phnet::linalg::Matrix;
use phnet::network::MlpNetwork;

fn net_341() -> MlpNetwork {
    let w1 = Matrix::new(
        4,
        3,
        vec![0.5, -0.25, 0.75, -1.0, 0.125, 0.3, 0.05, 0.6, -0.7, 0.9, -0.4, 0.2],
    )
    .unwrap();
    let b1 = vec![0.1, -0.2, 0.0, 0.3];
    let w2 = Matrix::new(1, 4, vec![0.8, -0.6, 1.1, 0.4]).unwrap();
    MlpNetwork::from_parts(w1, b1, w2, vec![-0.05]).unwrap()
}

#[test]
fn forward_matches_unrolled_formula() {
    let x: [f64; 3] = [0.3, -0.9, 0.45];
    let w1 = [
        [0.5, -0.25, 0.75],
        [-1.0, 0.125, 0.3],
        [0.05, 0.6, -0.7],
        [0.9, -0.4, 0.2],
    ];
    let b1 = [0.1, -0.2, 0.0, 0.3];
    let w2 = [0.8, -0.6, 1.1, 0.4];
    let mut y: f64 = -0.05;
    for j in 0..4 {
        let a: f64 = w1[j][0] * x[0] + w1[j][1] * x[1] + w1[j][2] * x[2] + b1[j];
        y += w2[j] * a.tanh();
    }
    let got = net_341().forward(&x).unwrap()[0];
    assert!((got - y).abs() < 1e-14, "{got} vs {y}");
}

#[test]
fn params_follow_packing_order() {
    let p = net_341().params().0;
    assert_eq!(p.len(), 4 * 3 + 4 + 4 + 1);
    assert_eq!(&p[..3], &[0.5, -0.25, 0.75]);
    assert_eq!(&p[12..16], &[0.1, -0.2, 0.0, 0.3]);
    assert_eq!(&p[16..20], &[0.8, -0.6, 1.1, 0.4]);
    assert_eq!(p[20], -0.05);
}

#[test]
fn jacobian_rows_are_sample_major() {
    let net = net_341();
    let batch = [vec![0.1, 0.2, 0.3], vec![-0.5, 0.0, 0.9]];
    let jac = net.jacobian(&batch).unwrap();
    assert_eq!((jac.rows(), jac.cols()), (2, 21));
    for (s, x) in batch.iter().enumerate() {
        let single = net.jacobian(&[x.clone()]).unwrap();
        assert_eq!(jac.row(s), single.row(0));
        assert_eq!(single.get(0, 20), 1.0);
    }
}
