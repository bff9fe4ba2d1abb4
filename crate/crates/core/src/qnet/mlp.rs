use rand::Rng;

use super::{DifferentiableQ, QFunction};
use crate::envs::EnvKind;
use crate::error::{Error, Result};
use crate::textfmt::{content_lines, join_f64, parse_num};

const FORMAT_TAG: &str = "mlp-qnet";
const FORMAT_VERSION: u32 = 1;

/// Fixed affine map applied to observations before the first layer:
/// `x' = (x - shift) * scale`. Not trained.
#[derive(Clone, Debug, PartialEq)]
pub struct InputScaling {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn identity(dim: usize) -> Self {
        InputScaling {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Maps the typical operating range of each observation to roughly [-1, 1].
    pub fn for_env(kind: EnvKind) -> Self {
        let (center, half_range): (&[f64], &[f64]) = match kind {
            EnvKind::CartPole => (&[0.0, 0.0, 0.0, 0.0], &[2.4, 3.0, 0.21, 3.5]),
            EnvKind::MountainCar => (&[-0.3, 0.0], &[0.9, 0.07]),
        };
        InputScaling {
            shift: center.to_vec(),
            scale: half_range.iter().map(|h| 1.0 / h).collect(),
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .zip(&self.shift)
                .zip(&self.scale)
                .map(|((v, s), c)| (v - s) * c),
        );
    }
}

/// One-hidden-layer ReLU network mapping a state to one Q-value per action.
///
/// Parameters are stored flat as `[w1 (hidden x m), b1, w2 (k x hidden), b2]`,
/// row-major, which is also the layout used by [`DifferentiableQ`].
#[derive(Clone, Debug, PartialEq)]
pub struct MlpQNetwork {
    input_dim: usize,
    hidden_dim: usize,
    output_dim: usize,
    scaling: InputScaling,
    params: Vec<f64>,
}

impl MlpQNetwork {
    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        let n = hidden_dim * input_dim + hidden_dim + output_dim * hidden_dim + output_dim;
        MlpQNetwork {
            input_dim,
            hidden_dim,
            output_dim,
            scaling: InputScaling::identity(input_dim),
            params: vec![0.0; n],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for weights and biases.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Self {
        let mut net = Self::zeros(input_dim, hidden_dim, output_dim);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden_dim as f64).sqrt();
        let split = hidden_dim * input_dim + hidden_dim;
        for (i, p) in net.params.iter_mut().enumerate() {
            let bound = if i < split { b1 } else { b2 };
            *p = rng.gen_range(-bound..bound);
        }
        net
    }

    pub fn with_scaling(mut self, scaling: InputScaling) -> Self {
        assert_eq!(scaling.shift.len(), self.input_dim);
        assert_eq!(scaling.scale.len(), self.input_dim);
        self.scaling = scaling;
        self
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn scaling(&self) -> &InputScaling {
        &self.scaling
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.offsets().0]
    }

    pub fn b1(&self) -> &[f64] {
        let (b1, w2, _) = self.offsets();
        &self.params[b1..w2]
    }

    pub fn w2(&self) -> &[f64] {
        let (_, w2, b2) = self.offsets();
        &self.params[w2..b2]
    }

    pub fn b2(&self) -> &[f64] {
        &self.params[self.offsets().2..]
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Computes Q-values; also returns the scaled input and hidden activations.
    fn forward_full(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        if state.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: state.len(),
            });
        }
        let (o_b1, o_w2, o_b2) = self.offsets();
        let (m, h, k) = (self.input_dim, self.hidden_dim, self.output_dim);
        let mut x = Vec::with_capacity(m);
        self.scaling.apply(state, &mut x);

        let w1 = &self.params[..o_b1];
        let b1 = &self.params[o_b1..o_w2];
        let hidden: Vec<f64> = (0..h)
            .map(|r| {
                let row = &w1[r * m..(r + 1) * m];
                let z = b1[r] + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
                z.max(0.0)
            })
            .collect();

        let w2 = &self.params[o_w2..o_b2];
        let b2 = &self.params[o_b2..];
        let q = (0..k)
            .map(|r| {
                let row = &w2[r * h..(r + 1) * h];
                b2[r] + row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Ok((x, hidden, q))
    }

    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_full(state)?.2)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{FORMAT_TAG} {FORMAT_VERSION}\n"));
        out.push_str(&format!(
            "shape {} {} {}\n",
            self.input_dim, self.hidden_dim, self.output_dim
        ));
        out.push_str(&format!("input_shift {}\n", join_f64(&self.scaling.shift)));
        out.push_str(&format!("input_scale {}\n", join_f64(&self.scaling.scale)));
        out.push_str(&format!("w1 {}\n", join_f64(self.w1())));
        out.push_str(&format!("b1 {}\n", join_f64(self.b1())));
        out.push_str(&format!("w2 {}\n", join_f64(self.w2())));
        out.push_str(&format!("b2 {}\n", join_f64(self.b2())));
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (ln, header) = lines.next().ok_or_else(|| Error::parse(0, "empty file"))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some(FORMAT_TAG) {
            return Err(Error::parse(ln, "not an mlp-qnet file"));
        }
        let version: u32 = parse_num(tok.next(), ln, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::parse(ln, format!("unsupported version {version}")));
        }
        let (ln, shape) = lines.next().ok_or_else(|| Error::parse(ln, "missing shape"))?;
        let mut tok = shape.split_whitespace();
        if tok.next() != Some("shape") {
            return Err(Error::parse(ln, "expected `shape`"));
        }
        let m: usize = parse_num(tok.next(), ln, "input dim")?;
        let h: usize = parse_num(tok.next(), ln, "hidden dim")?;
        let k: usize = parse_num(tok.next(), ln, "output dim")?;

        let mut net = Self::zeros(m, h, k);
        let mut read = |name: &str, len: usize| -> Result<Vec<f64>> {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("missing `{name}`")))?;
            let mut tok = line.split_whitespace();
            if tok.next() != Some(name) {
                return Err(Error::parse(ln, format!("expected `{name}`")));
            }
            let values = tok
                .map(|t| parse_num::<f64>(Some(t), ln, name))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != len {
                return Err(Error::parse(
                    ln,
                    format!("`{name}` has {} values, expected {len}", values.len()),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(ln, format!("non-finite value in `{name}`")));
            }
            Ok(values)
        };
        let shift = read("input_shift", m)?;
        let scale = read("input_scale", m)?;
        let mut params = read("w1", h * m)?;
        params.extend(read("b1", h)?);
        params.extend(read("w2", k * h)?);
        params.extend(read("b2", k)?);
        net.scaling = InputScaling { shift, scale };
        net.params = params;
        Ok(net)
    }
}

impl QFunction for MlpQNetwork {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn num_actions(&self) -> usize {
        self.output_dim
    }

    fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward(state)
    }
}

impl DifferentiableQ for MlpQNetwork {
    fn num_params(&self) -> usize {
        self.params.len()
    }

    fn params(&self) -> Vec<f64> {
        self.params.clone()
    }

    fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    fn accumulate_gradient(
        &self,
        state: &[f64],
        grad: &mut [f64],
        upstream: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    ) -> Result<Vec<f64>> {
        let (x, hidden, q) = self.forward_full(state)?;
        let dq = upstream(&q);
        let (o_b1, o_w2, o_b2) = self.offsets();
        let (m, h, k) = (self.input_dim, self.hidden_dim, self.output_dim);
        let w2 = &self.params[o_w2..o_b2];

        let mut dhidden = vec![0.0; h];
        for r in 0..k {
            let g = dq[r];
            if g == 0.0 {
                continue;
            }
            grad[o_b2 + r] += g;
            for c in 0..h {
                grad[o_w2 + r * h + c] += g * hidden[c];
                dhidden[c] += g * w2[r * h + c];
            }
        }
        for r in 0..h {
            // ReLU derivative: zero where the unit is off.
            if hidden[r] <= 0.0 {
                continue;
            }
            let g = dhidden[r];
            grad[o_b1 + r] += g;
            for c in 0..m {
                grad[r * m + c] += g * x[c];
            }
        }
        Ok(q)
    }
}
