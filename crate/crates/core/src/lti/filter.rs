use super::ss::DiscreteStateSpace;

/// Allocation-free stepper for a discrete SISO realization.
///
/// Output is read before the state update, so `step` returns
/// `C x[k] + D u[k]` and advances to `x[k+1] = A x[k] + B u[k]`.
#[derive(Debug, Clone)]
pub struct DiscreteFilter {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
    x: Vec<f64>,
    scratch: Vec<f64>,
}

impl DiscreteFilter {
    pub fn new(sys: &DiscreteStateSpace) -> Self {
        let n = sys.order();
        let mut a = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                a.push(sys.a[(i, j)]);
            }
        }
        Self {
            n,
            a,
            b: sys.b.iter().copied().collect(),
            c: sys.c.iter().copied().collect(),
            d: sys.d,
            x: vec![0.0; n],
            scratch: vec![0.0; n],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn state_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn clear(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    pub fn output(&self, u: f64) -> f64 {
        self.c.iter().zip(&self.x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    #[inline]
    pub fn update(&mut self, u: f64) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            self.scratch[i] =
                row.iter().zip(&self.x).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * u;
        }
        std::mem::swap(&mut self.x, &mut self.scratch);
    }

    #[inline]
    pub fn step(&mut self, u: f64) -> f64 {
        let y = self.output(u);
        self.update(u);
        y
    }
}
