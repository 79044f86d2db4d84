//! Solver-independent residual checks and a plain-text problem dump.

use std::fmt::Write as _;

use super::{ConicProblem, ConicSolution, LmiSense, VarKind};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    /// Smallest eigenvalue of each LMI written as `⪰ 0` (negative = violated).
    pub lmi_min_eig: Vec<(String, f64)>,
    /// Value of each scalar constraint written as `>= 0`.
    pub scalar_values: Vec<(String, f64)>,
    /// Arguments of the objective logarithms (must be positive).
    pub log_args: Vec<f64>,
    /// Objective recomputed from the variable values.
    pub objective: f64,
    /// `|recomputed objective - reported objective|`.
    pub objective_residual: f64,
}

impl AuditReport {
    pub fn max_violation(&self) -> f64 {
        let lmi = self.lmi_min_eig.iter().map(|(_, e)| -e);
        let sc = self.scalar_values.iter().map(|(_, v)| -v);
        let lg = self.log_args.iter().map(|a| -a);
        lmi.chain(sc).chain(lg).fold(0.0, f64::max)
    }

    /// Largest of the constraint violations and the objective residual.
    pub fn max_residual(&self) -> f64 {
        self.max_violation().max(self.objective_residual)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

/// Re-evaluates every constraint and the objective directly from the model
/// expressions at the solution's variable values.
pub fn audit(p: &ConicProblem, s: &ConicSolution) -> AuditReport {
    let x = &s.x;
    let lmi_min_eig = p
        .lmis
        .iter()
        .map(|l| {
            let m = l.expr.eval(x);
            let e = match l.sense {
                LmiSense::Psd => linalg::min_eig(&m),
                LmiSense::Nsd => -linalg::max_eig(&m),
            };
            (l.name.clone(), e)
        })
        .collect();
    let scalar_values = p.ineqs.iter().map(|c| (c.name.clone(), c.expr.eval(x))).collect();
    let log_args: Vec<f64> = p.log_terms.iter().map(|(_, a)| a.eval(x)).collect();
    let objective = p.objective_at(x);
    AuditReport {
        lmi_min_eig,
        scalar_values,
        log_args,
        objective,
        objective_residual: if objective.is_finite() {
            (objective - s.objective).abs()
        } else {
            f64::INFINITY
        },
    }
}

fn write_matrix(out: &mut String, m: &linalg::CMat) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:+.12e}{:+.12e}i", m[(i, j)].re, m[(i, j)].im))
            .collect();
        let _ = writeln!(out, "    {}", row.join(" "));
    }
}

/// Text rendering of the problem: variable layout, objective, and each
/// constraint block as a constant matrix plus one coefficient matrix per real
/// unknown it involves.
pub fn dump(p: &ConicProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "real_unknowns {}", p.n_real());
    let _ = writeln!(out, "variables");
    for d in &p.decls {
        let desc = match &d.kind {
            VarKind::Scalar(v) => format!("scalar index {}", v.0),
            VarKind::Hermitian(v) => format!("hermitian {}x{} offset {}", v.n, v.n, v.offset),
            VarKind::Vector(v) => format!("complex_vector {} offset {}", v.n, v.offset),
        };
        let _ = writeln!(out, "  {} {}", d.name, desc);
    }
    let _ = writeln!(out, "objective maximize");
    for (w, a) in &p.log_terms {
        let _ = writeln!(out, "  log weight {w:e} const {:e} terms {:?}", a.constant, a.merged());
    }
    let _ = writeln!(
        out,
        "  linear const {:e} terms {:?}",
        p.linear.constant,
        p.linear.merged()
    );
    for l in &p.lmis {
        let sense = match l.sense {
            LmiSense::Psd => ">= 0",
            LmiSense::Nsd => "<= 0",
        };
        let dim = l.expr.dim();
        let _ = writeln!(out, "lmi \"{}\" {dim}x{dim} {sense}", l.name);
        let zero = vec![0.0; p.n_real()];
        let _ = writeln!(out, "  F0");
        write_matrix(&mut out, &l.expr.eval(&zero));
        let mut vars: Vec<usize> = l
            .expr
            .entries()
            .flat_map(|(_, e)| e.terms.iter().map(|(i, _)| *i))
            .collect();
        vars.sort_unstable();
        vars.dedup();
        for v in vars {
            let mut unit = zero.clone();
            unit[v] = 1.0;
            let _ = writeln!(out, "  F[{v}]");
            write_matrix(&mut out, &(l.expr.eval(&unit) - l.expr.eval(&zero)));
        }
    }
    for c in &p.ineqs {
        let _ = writeln!(
            out,
            "scalar \"{}\" >= 0 const {:e} terms {:?}",
            c.name,
            c.expr.constant,
            c.expr.merged()
        );
    }
    out
}
