// Deterministic topic-clustered word vectors for the fixture store.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const DIM: usize = 48;
const NOISE: f64 = 0.5;

fn direction(name: &str) -> Vec<f64> {
    let seed: [u8; 32] = Sha256::digest(name.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Turns a topics file into a vector file, one word per line, in file order.
pub fn render(topics: &str) -> String {
    let mut out = String::new();
    for line in topics.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap();
        let mut scale = 1.0;
        let mut mix = vec![0.0; DIM];
        for f in fields {
            if let Some(s) = f.strip_prefix('*') {
                scale = s.parse().expect("scale");
                continue;
            }
            let (topic, w) = match f.split_once(':') {
                Some((t, w)) => (t, w.parse::<f64>().expect("weight")),
                None => (f, 1.0),
            };
            for (m, d) in mix.iter_mut().zip(direction(&format!("topic:{topic}"))) {
                *m += w * d;
            }
        }
        let norm = mix.iter().map(|x| x * x).sum::<f64>().sqrt();
        let noise = direction(&format!("word:{word}"));
        let v: Vec<f64> = mix.iter().zip(&noise).map(|(m, e)| m / norm + NOISE * e).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.push_str(word);
        for x in v {
            out.push_str(&format!(" {:.5}", scale * x / n));
        }
        out.push('\n');
    }
    out
}
