//! Scalar reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the node index is already a
//! topological order. Each node stores its value and a contiguous run of
//! `(parent, local partial)` edges; `backward` walks the nodes once in
//! reverse.

use super::LearnError;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    values: Vec<f64>,
    edge_start: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

/// Adjoints of every node after a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients(Vec<f64>);

impl Gradients {
    pub fn get(&self, v: Var) -> f64 {
        self.0[v.index()]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every node, keeping the allocations.
    pub fn clear(&mut self) {
        self.values.clear();
        self.edge_start.clear();
        self.parents.clear();
        self.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    fn push(&mut self, value: f64, edges: impl IntoIterator<Item = (Var, f64)>) -> Var {
        let id = self.values.len();
        assert!(id < u32::MAX as usize, "tape overflow");
        self.values.push(value);
        self.edge_start.push(self.parents.len() as u32);
        for (p, d) in edges {
            debug_assert!(p.index() < id, "parent must precede child");
            self.parents.push(p.0);
            self.partials.push(d);
        }
        Var(id as u32)
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, [])
    }

    /// Node with caller-supplied value and local partials.
    pub fn custom(&mut self, value: f64, edges: &[(Var, f64)]) -> Var {
        self.push(value, edges.iter().copied())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, [(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, [(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, [(a, y), (b, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x / y, [(a, 1.0 / y), (b, -x / (y * y))])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, [(a, k)])
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, [(a, 1.0)])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).exp();
        self.push(v, [(a, v)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), [(a, 1.0 / x)])
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).sqrt();
        self.push(v, [(a, 0.5 / v)])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).tanh();
        self.push(v, [(a, 1.0 - v * v)])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        if x > 0.0 {
            self.push(x, [(a, 1.0)])
        } else {
            self.push(0.0, [(a, 0.0)])
        }
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        self.push(v, xs.iter().map(|&x| (x, 1.0)))
    }

    /// `Σ w_i x_i + b` as a single node.
    pub fn dot_bias(&mut self, ws: &[Var], xs: &[Var], b: Var) -> Var {
        assert_eq!(ws.len(), xs.len(), "dot product length mismatch");
        let mut v = self.value(b);
        for (&w, &x) in ws.iter().zip(xs) {
            v += self.value(w) * self.value(x);
        }
        let id = self.values.len();
        self.values.push(v);
        self.edge_start.push(self.parents.len() as u32);
        for (&w, &x) in ws.iter().zip(xs) {
            let (wv, xv) = (self.values[w.index()], self.values[x.index()]);
            self.parents.push(w.0);
            self.partials.push(xv);
            self.parents.push(x.0);
            self.partials.push(wv);
        }
        self.parents.push(b.0);
        self.partials.push(1.0);
        Var(id as u32)
    }

    /// Numerically stable `ln Σ exp(x_i)`.
    pub fn log_sum_exp(&mut self, xs: &[Var]) -> Var {
        let vals: Vec<f64> = xs.iter().map(|&x| self.value(x)).collect();
        let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = vals.iter().map(|v| (v - mx).exp()).sum();
        let lse = mx + s.ln();
        let edges: Vec<(Var, f64)> = xs
            .iter()
            .zip(&vals)
            .map(|(&x, v)| (x, (v - lse).exp()))
            .collect();
        self.push(lse, edges)
    }

    /// Adjoints of every node with respect to `out`. Fails with the id of
    /// the first node (in reverse order) whose value or adjoint is not
    /// finite.
    pub fn backward(&self, out: Var) -> Result<Gradients, LearnError> {
        let n = out.index() + 1;
        let mut adj = vec![0.0f64; n];
        adj[out.index()] = 1.0;
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            if !a.is_finite() || !self.values[i].is_finite() {
                return Err(LearnError::NonFinite { node: i });
            }
            let start = self.edge_start[i] as usize;
            let end = self
                .edge_start
                .get(i + 1)
                .map_or(self.parents.len(), |&e| e as usize);
            for e in start..end {
                adj[self.parents[e] as usize] += a * self.partials[e];
            }
        }
        adj.resize(self.values.len(), 0.0);
        Ok(Gradients(adj))
    }
}
