use canoise_core::graph::{Node, NodeId};
use canoise_core::scm::{decompose, Dataset, Expr, NoiseId, NoiseSpec, ScmModel, UnaryKind};
use proptest::prelude::*;

const X: NodeId = NodeId(0);
const Z: NodeId = NodeId(1);
const H: NodeId = NodeId(2);
const Y: NodeId = NodeId(3);
const EY: NoiseId = NoiseId(3);

fn nodes() -> Vec<Node> {
    [("X", true), ("Z", true), ("H", false), ("Y", true)]
        .iter()
        .map(|(n, o)| Node {
            name: n.to_string(),
            observed: *o,
        })
        .collect()
}

fn factor() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::Var(X)),
        Just(Expr::Var(Z)),
        Just(Expr::Var(H)),
        Just(Expr::Noise(EY)),
        Just(Expr::unary(UnaryKind::Tanh, Expr::Var(X))),
        Just(Expr::unary(UnaryKind::Square, Expr::Var(Z))),
        Just(Expr::unary(UnaryKind::Exp, Expr::Var(H))),
        Just(Expr::unary(UnaryKind::Tanh, Expr::Sum(vec![Expr::Var(X), Expr::Noise(EY)]))),
        (-2.0f64..2.0).prop_map(Expr::Constant),
    ]
}

fn term() -> impl Strategy<Value = Expr> {
    (proptest::collection::vec(factor(), 1..4), -3.0f64..3.0).prop_map(|(fs, c)| {
        let e = if fs.len() == 1 { fs.into_iter().next().unwrap() } else { Expr::Product(fs) };
        Expr::scaled(c, e)
    })
}

/// Y equation built from random terms; X and the private noise always appear.
fn y_equation() -> impl Strategy<Value = Expr> {
    proptest::collection::vec(term(), 0..5).prop_map(|mut ts| {
        ts.push(Expr::Var(X));
        ts.push(Expr::Noise(EY));
        Expr::Sum(ts)
    })
}

fn model(y: Expr) -> ScmModel {
    ScmModel::from_equations(
        nodes(),
        vec![Expr::Noise(NoiseId(0)), Expr::Noise(NoiseId(1)), Expr::Noise(NoiseId(2)), y],
        ["ex", "ez", "eh", "ey"].iter().map(|n| NoiseSpec::gaussian(n, 1.0)).collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn taxonomy_reassembles_the_equation(
        y in y_equation(),
        vals in proptest::collection::vec(-2.0f64..2.0, 8),
    ) {
        let m = model(y);
        let t = decompose(&m, Y, X).unwrap();
        let back = t.reassemble();
        let vars = [vals[0], vals[1], vals[2], 0.0];
        let noises = [vals[4], vals[5], vals[6], vals[7]];
        let a = m.equation(Y).eval(&vars, &noises);
        let b = back.eval(&vars, &noises);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn csv_round_trip(
        rows in proptest::collection::vec((-1e6f64..1e6, -1e-6f64..1e-6), 1..40),
        seed in any::<u64>(),
    ) {
        let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let ds = Dataset::from_columns(&[("a", &a), ("b", &b)]).unwrap();
        let ds = Dataset::new(ds.columns().to_vec(), (0..ds.n_rows()).flat_map(|r| ds.row(r).to_vec()).collect(), Some(seed)).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn linear_gaussian_covariance() {
    // X = ex, Z = 0.5 X + ez, Y = 2 X - Z + ey; unit noises.
    let m = ScmModel::from_equations(
        [("X", true), ("Z", true), ("Y", true)]
            .iter()
            .map(|(n, o)| Node {
                name: n.to_string(),
                observed: *o,
            })
            .collect(),
        vec![
            Expr::Noise(NoiseId(0)),
            Expr::Sum(vec![Expr::scaled(0.5, Expr::Var(NodeId(0))), Expr::Noise(NoiseId(1))]),
            Expr::Sum(vec![
                Expr::scaled(2.0, Expr::Var(NodeId(0))),
                Expr::scaled(-1.0, Expr::Var(NodeId(1))),
                Expr::Noise(NoiseId(2)),
            ]),
        ],
        ["ex", "ez", "ey"].iter().map(|n| NoiseSpec::gaussian(n, 1.0)).collect(),
    )
    .unwrap();
    let n = 200_000;
    let ds = m.sample(n, 11).unwrap();
    let cols: Vec<Vec<f64>> = ["X", "Z", "Y"].iter().map(|c| ds.column(c).unwrap()).collect();
    // Population covariance from the structural coefficients.
    let b = [[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [1.5, -1.0, 1.0]];
    for i in 0..3 {
        for j in 0..3 {
            let want: f64 = (0..3).map(|k| b[i][k] * b[j][k]).sum();
            let mi = cols[i].iter().sum::<f64>() / n as f64;
            let mj = cols[j].iter().sum::<f64>() / n as f64;
            let got = cols[i].iter().zip(&cols[j]).map(|(a, c)| (a - mi) * (c - mj)).sum::<f64>() / n as f64;
            assert!((got - want).abs() < 0.03 * want.abs().max(1.0), "cov[{i}][{j}] {got} vs {want}");
        }
    }
}

#[test]
fn sampling_is_reproducible_and_seed_sensitive() {
    let m = model(Expr::Sum(vec![Expr::Var(X), Expr::Product(vec![Expr::Var(H), Expr::Var(Z)]), Expr::Noise(EY)]));
    let a = m.sample(3000, 5).unwrap();
    assert_eq!(a, m.sample(3000, 5).unwrap());
    assert_ne!(a, m.sample(3000, 6).unwrap());
    // Rows do not depend on the requested length.
    let b = m.sample(1500, 5).unwrap();
    assert_eq!(a.row(1499), b.row(1499));
}
