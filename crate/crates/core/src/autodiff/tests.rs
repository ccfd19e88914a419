use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gradcheck::{central_difference, relative_error};
use super::*;
use crate::error::Error;

fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor<f64> {
    Tensor::matrix(rows, cols, data.to_vec()).unwrap()
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    mat(rows, cols, &(0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>())
}

/// Builds `sum(f(x) * weights)` around a fresh leaf `x` and returns the tape and handles.
fn scalarize(
    x: &Tensor<f64>,
    weights_seed: u64,
    f: &dyn Fn(&mut Tape<f64>, Var) -> Var,
) -> (Tape<f64>, Var, Var) {
    let mut tape = Tape::new();
    let xv = tape.param(x.clone());
    let out = f(&mut tape, xv);
    let shape = tape.value(out).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(weights_seed);
    let n: usize = shape.iter().product();
    let w = Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let wv = tape.constant(w);
    let prod = tape.mul_elem(out, wv).unwrap();
    let root = tape.sum(prod).unwrap();
    (tape, xv, root)
}

fn gradient_error(x: &Tensor<f64>, f: &dyn Fn(&mut Tape<f64>, Var) -> Var) -> f64 {
    let (tape, xv, root) = scalarize(x, 99, f);
    let analytic = tape.backward(root).unwrap().wrt(xv).into_data();
    let numeric = central_difference(
        |probe| {
            let t = Tensor::new(x.shape().to_vec(), probe.to_vec()).unwrap();
            let (tape, _, root) = scalarize(&t, 99, f);
            tape.value(root).item().unwrap()
        },
        x.data(),
        1e-5,
    );
    relative_error(&analytic, &numeric, 1e-6)
}

#[test]
fn matmul_shape_rule() {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[3, 4]));
    let c = tape.matmul(a, b).unwrap();
    assert_eq!(tape.value(c).shape(), &[2, 4]);
}

#[test]
fn matmul_mismatch_names_op_and_shapes() {
    let mut tape = Tape::<f64>::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 4]));
    match tape.matmul(a, b) {
        Err(Error::ShapeMismatch { op, lhs, rhs }) => {
            assert_eq!(op, "matmul");
            assert_eq!(lhs, vec![2, 3]);
            assert_eq!(rhs, vec![2, 4]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn leaky_relu_and_tanh_values() {
    let mut tape = Tape::new();
    let x = tape.constant(mat(1, 3, &[-1.0, 0.0, 2.0]));
    let y = tape.leaky_relu(x, 0.2).unwrap();
    assert_eq!(tape.value(y).data(), &[-0.2, 0.0, 2.0]);
    let z = tape.constant(mat(1, 1, &[0.0]));
    let t = tape.tanh(z).unwrap();
    assert_eq!(tape.value(t).data(), &[0.0]);
}

#[test]
fn log_rejects_non_positive() {
    let mut tape = Tape::new();
    let x = tape.constant(mat(1, 2, &[1.0, 0.0]));
    assert!(matches!(tape.log(x), Err(Error::Domain { op: "log", .. })));
}

#[test]
fn power_rule() {
    let mut tape = Tape::new();
    let w = tape.param(Tensor::scalar(3.0));
    let sq = tape.square(w).unwrap();
    let g = tape.backward(sq).unwrap();
    assert_eq!(g.wrt(w).data(), &[6.0]);
}

#[test]
fn product_rule() {
    let mut tape = Tape::new();
    let a = tape.param(mat(1, 2, &[1.0, 2.0]));
    let b = tape.param(mat(1, 2, &[3.0, 4.0]));
    let p = tape.mul_elem(a, b).unwrap();
    let s = tape.sum(p).unwrap();
    let g = tape.backward(s).unwrap();
    assert_eq!(g.wrt(a).data(), &[3.0, 4.0]);
    assert_eq!(g.wrt(b).data(), &[1.0, 2.0]);
}

#[test]
fn non_scalar_root_rejected() {
    let mut tape = Tape::new();
    let a = tape.param(mat(1, 2, &[1.0, 2.0]));
    let sq = tape.square(a).unwrap();
    assert!(matches!(tape.backward(sq), Err(Error::NonScalarRoot { .. })));
}

#[test]
fn unreachable_leaf_has_zero_grad() {
    let mut tape = Tape::new();
    let a = tape.param(mat(1, 2, &[1.0, 2.0]));
    let unused = tape.param(mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let s = tape.sum(a).unwrap();
    let g = tape.backward(s).unwrap();
    assert!(g.get(unused).is_none());
    assert_eq!(g.wrt(unused), Tensor::zeros(&[2, 2]));
}

#[test]
fn repeated_use_accumulates() {
    let mut tape = Tape::new();
    let a = tape.param(Tensor::scalar(2.0));
    let b = tape.mul_elem(a, a).unwrap();
    let c = tape.add(b, a).unwrap();
    let g = tape.backward(c).unwrap();
    assert_eq!(g.wrt(a).data(), &[5.0]);
}

#[test]
fn replay_reproduces_recorded_values_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tape = Tape::new();
    let x = tape.param(random(&mut rng, 5, 3));
    let w = tape.param(random(&mut rng, 3, 4));
    let b = tape.param(random(&mut rng, 1, 4));
    let h = tape.affine(x, w, b).unwrap();
    let h = tape.leaky_relu(h, 0.2).unwrap();
    let h = tape.softplus(h).unwrap();
    let h = tape.log(h).unwrap();
    let s = tape.mean(h).unwrap();
    let replayed = tape.replay().unwrap();
    for (var, v) in tape.vars().zip(&replayed) {
        let a: Vec<u64> = v.data().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = tape.value(var).data().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b, "node {}", var.index());
        for input in tape.inputs(var) {
            assert!(input.index() < var.index(), "topological order violated");
        }
    }
    assert_eq!(tape.kind(s), OpKind::Mean);
}

type Builder = Box<dyn Fn(&mut Tape<f64>, Var) -> Var>;

fn primitive_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, (usize, usize), Builder)> {
    let w = random(rng, 3, 4);
    let b = random(rng, 1, 4);
    let other = random(rng, 4, 3);
    let row = random(rng, 1, 3);
    let (w2, b2, o2, o3) = (w.clone(), b.clone(), other.clone(), other.clone());
    vec![
        ("add", (4, 3), Box::new(move |t, x| {
            let o = t.constant(other.clone());
            t.add(x, o).unwrap()
        })),
        ("sub", (4, 3), Box::new(move |t, x| {
            let o = t.constant(o2.clone());
            t.sub(o, x).unwrap()
        })),
        ("mul_elem", (4, 3), Box::new(move |t, x| {
            let o = t.constant(o3.clone());
            t.mul_elem(x, o).unwrap()
        })),
        ("matmul", (4, 3), Box::new(move |t, x| {
            let w = t.constant(w.clone());
            t.matmul(x, w).unwrap()
        })),
        ("affine", (4, 3), Box::new(move |t, x| {
            let w = t.constant(w2.clone());
            let b = t.constant(b2.clone());
            t.affine(x, w, b).unwrap()
        })),
        ("matmul_rhs", (1, 3), Box::new(move |t, x| {
            let a = t.constant(b.clone());
            let a = t.transpose(a).unwrap();
            t.matmul(a, x).unwrap()
        })),
        ("leaky_relu", (4, 3), Box::new(|t, x| t.leaky_relu(x, 0.2).unwrap())),
        ("tanh", (4, 3), Box::new(|t, x| t.tanh(x).unwrap())),
        ("exp", (4, 3), Box::new(|t, x| t.exp(x).unwrap())),
        ("log", (4, 3), Box::new(|t, x| {
            let s = t.softplus(x).unwrap();
            t.log(s).unwrap()
        })),
        ("square", (4, 3), Box::new(|t, x| t.square(x).unwrap())),
        ("sqrt", (4, 3), Box::new(|t, x| {
            let s = t.square(x).unwrap();
            let s = t.offset(s, 0.5).unwrap();
            t.sqrt(s).unwrap()
        })),
        ("softplus", (4, 3), Box::new(|t, x| t.softplus(x).unwrap())),
        ("scale", (4, 3), Box::new(|t, x| t.scale(x, -1.7).unwrap())),
        ("clamp", (4, 3), Box::new(|t, x| t.clamp(x, -1.0, 1.0).unwrap())),
        ("sum", (4, 3), Box::new(|t, x| t.sum(x).unwrap())),
        ("mean", (4, 3), Box::new(|t, x| t.mean(x).unwrap())),
        ("row_sum", (4, 3), Box::new(|t, x| t.row_sum(x).unwrap())),
        ("broadcast", (1, 3), Box::new(|t, x| t.broadcast(x, 5).unwrap())),
        ("transpose", (4, 3), Box::new(|t, x| t.transpose(x).unwrap())),
        ("concat_rows", (4, 3), Box::new(move |t, x| {
            let r = t.constant(row.clone());
            let c = t.concat_rows(x, r).unwrap();
            t.concat_rows(c, x).unwrap()
        })),
        ("slice_rows", (4, 3), Box::new(|t, x| t.slice_rows(x, 1, 3).unwrap())),
    ]
}

#[test]
fn every_primitive_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..10 {
        for (name, (r, c), build) in primitive_cases(&mut rng) {
            let x = random(&mut rng, r, c);
            let err = gradient_error(&x, build.as_ref());
            assert!(err < 1e-4, "{name} case {case}: relative error {err}");
        }
    }
}

#[test]
fn randomized_composed_graphs_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..30 {
        let w1 = random(&mut rng, 3, 5);
        let b1 = random(&mut rng, 1, 5);
        let w2 = random(&mut rng, 5, 2);
        let ops: Vec<u8> = (0..4).map(|_| rng.random_range(0..5)).collect();
        let build = move |t: &mut Tape<f64>, x: Var| {
            let w1 = t.constant(w1.clone());
            let b1 = t.constant(b1.clone());
            let w2 = t.constant(w2.clone());
            let mut h = t.affine(x, w1, b1).unwrap();
            for &op in &ops {
                h = match op {
                    0 => t.leaky_relu(h, 0.2).unwrap(),
                    1 => t.tanh(h).unwrap(),
                    2 => t.softplus(h).unwrap(),
                    3 => {
                        let s = t.square(h).unwrap();
                        t.scale(s, 0.3).unwrap()
                    }
                    _ => t.mul_elem(h, h).unwrap(),
                };
                h = t.tanh(h).unwrap();
            }
            let out = t.matmul(h, w2).unwrap();
            let sq = t.square(out).unwrap();
            t.mean(sq).unwrap()
        };
        let x = random(&mut rng, 4, 3);
        let err = gradient_error(&x, &build);
        assert!(err < 1e-4, "case {case}: relative error {err}");
    }
}

#[test]
fn backward_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random(&mut rng, 3, 3);
    let (a, b) = (1.5, -0.25);
    let grad_of = |which: u8| {
        let mut t = Tape::new();
        let xv = t.param(x.clone());
        let f = {
            let s = t.tanh(xv).unwrap();
            t.sum(s).unwrap()
        };
        let g = {
            let s = t.square(xv).unwrap();
            t.mean(s).unwrap()
        };
        let root = match which {
            0 => f,
            1 => g,
            _ => {
                let fa = t.scale(f, a).unwrap();
                let gb = t.scale(g, b).unwrap();
                t.add(fa, gb).unwrap()
            }
        };
        t.backward(root).unwrap().wrt(xv).into_data()
    };
    let (gf, gg, gc) = (grad_of(0), grad_of(1), grad_of(2));
    for i in 0..gc.len() {
        assert!((gc[i] - (a * gf[i] + b * gg[i])).abs() < 1e-12);
    }
}

#[test]
fn determinism_bitwise() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut t = Tape::new();
        let x = t.param(random(&mut rng, 8, 4));
        let w = t.param(random(&mut rng, 4, 4));
        let b = t.param(random(&mut rng, 1, 4));
        let h = t.affine(x, w, b).unwrap();
        let h = t.leaky_relu(h, 0.2).unwrap();
        let m = t.mean(h).unwrap();
        let g = t.backward(m).unwrap();
        let mut bits: Vec<u64> = t.value(m).data().iter().map(|v| v.to_bits()).collect();
        for v in [x, w, b] {
            bits.extend(g.wrt(v).data().iter().map(|v| v.to_bits()));
        }
        bits
    };
    assert_eq!(run(), run());
}

#[test]
fn f32_tape_works() {
    let mut tape = Tape::<f32>::new();
    let w = tape.param(Tensor::scalar(3.0f32));
    let sq = tape.square(w).unwrap();
    assert_eq!(tape.backward(sq).unwrap().wrt(w).data(), &[6.0f32]);
}
