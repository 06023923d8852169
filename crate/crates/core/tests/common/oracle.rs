use stegodetect::network::LstmLayerParams;
use stegodetect::Mat64;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straight-line reference: concatenate, multiply column by column, apply gates.
pub fn reference_lstm_step(x: &[f64], h: &[f64], c: &[f64], p: &LstmLayerParams<f64>) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<f64> = h.iter().chain(x).copied().collect();
    let gate = |w: &Mat64, b: &Mat64, j: usize| {
        let mut s = b.get(0, j);
        for (k, vk) in v.iter().enumerate() {
            s += vk * w.get(k, j);
        }
        s
    };
    let n = h.len();
    let mut h_new = vec![0.0; n];
    let mut c_new = vec![0.0; n];
    for j in 0..n {
        let i = sigmoid(gate(&p.w_i, &p.b_i, j));
        let f = sigmoid(gate(&p.w_f, &p.b_f, j));
        let g = gate(&p.w_c, &p.b_c, j).tanh();
        let o = sigmoid(gate(&p.w_o, &p.b_o, j));
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    (h_new, c_new)
}
