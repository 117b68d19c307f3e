#![allow(dead_code)]

pub mod qp {
    use clarabel::algebra::CscMatrix;
    use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};

    fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        (-gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp()
    }

    /// Dense dual soft-margin SVM solved by an interior-point QP solver.
    pub struct QpSvm {
        x: Vec<Vec<f64>>,
        coef: Vec<f64>,
        bias: f64,
        gamma: f64,
    }

    impl QpSvm {
        pub fn fit(x: &[Vec<f64>], y: &[bool], c: f64, gamma: f64) -> QpSvm {
            let n = x.len();
            let ys: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
            let k = |i: usize, j: usize| rbf(gamma, &x[i], &x[j]);
            let (mut pi, mut pj, mut pv) = (Vec::new(), Vec::new(), Vec::new());
            for j in 0..n {
                for i in 0..=j {
                    pi.push(i);
                    pj.push(j);
                    pv.push(ys[i] * ys[j] * k(i, j));
                }
            }
            let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);
            let q = vec![-1.0; n];
            // rows: yᵀα = 0; −α ≤ 0; α ≤ C
            let (mut ai, mut aj, mut av) = (Vec::new(), Vec::new(), Vec::new());
            for j in 0..n {
                ai.push(0);
                aj.push(j);
                av.push(ys[j]);
                ai.push(1 + j);
                aj.push(j);
                av.push(-1.0);
                ai.push(1 + n + j);
                aj.push(j);
                av.push(1.0);
            }
            let a = CscMatrix::new_from_triplets(1 + 2 * n, n, ai, aj, av);
            let mut b = vec![0.0; 1 + 2 * n];
            b[1 + n..].iter_mut().for_each(|v| *v = c);
            let cones = [ZeroConeT(1), NonnegativeConeT(2 * n)];
            let settings = DefaultSettingsBuilder::default()
                .verbose(false)
                .tol_gap_abs(1e-10)
                .tol_gap_rel(1e-10)
                .tol_feas(1e-10)
                .build()
                .unwrap();
            let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings);
            solver.solve();
            assert!(matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved));
            let alpha = solver.solution.x.clone();
            let coef: Vec<f64> = alpha.iter().zip(&ys).map(|(a, y)| a * y).collect();
            let margin = |i: usize| (0..n).map(|j| coef[j] * k(i, j)).sum::<f64>();
            let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 1e-6 * c && alpha[i] < c * (1.0 - 1e-6)).collect();
            let bias = if free.is_empty() {
                // midpoint of the feasible bias interval
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..n {
                    let r = ys[i] - margin(i);
                    let at_upper = alpha[i] >= c * (1.0 - 1e-6);
                    if (ys[i] > 0.0) != at_upper {
                        lo = lo.max(r);
                    } else {
                        hi = hi.min(r);
                    }
                }
                (lo + hi) / 2.0
            } else {
                free.iter().map(|&i| ys[i] - margin(i)).sum::<f64>() / free.len() as f64
            };
            QpSvm { x: x.to_vec(), coef, bias, gamma }
        }

        pub fn decision(&self, p: &[f64]) -> f64 {
            self.x.iter().zip(&self.coef).map(|(xi, c)| c * rbf(self.gamma, xi, p)).sum::<f64>() + self.bias
        }
    }
}
