//! Encoder-decoder and encoder-only Transformers on the autograd graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Grads, Graph, ParamId, ParamStore, Var};
use super::layers::{DecoderLayer, EncoderLayer, LayerNorm, Linear};
use super::matrix::Matrix;
use super::vocab::{BOS, EOS};

/// Architecture hyperparameters, selected by preset name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub name: String,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
}

impl BackboneConfig {
    pub const PRESETS: [&'static str; 3] = ["seq2seq-tiny", "seq2seq-small", "seq2seq-base"];

    pub fn preset(name: &str) -> Option<BackboneConfig> {
        let (d_model, heads, ff_dim, layers) = match name {
            "seq2seq-tiny" => (64, 4, 128, 2),
            "seq2seq-small" => (128, 4, 256, 2),
            "seq2seq-base" => (256, 8, 1024, 4),
            _ => return None,
        };
        Some(BackboneConfig {
            name: name.to_string(),
            d_model,
            heads,
            ff_dim,
            encoder_layers: layers,
            decoder_layers: layers,
        })
    }
}

fn log_softmax(row: &[f32]) -> Vec<f64> {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let lse = max + row.iter().map(|&z| (z as f64 - max).exp()).sum::<f64>().ln();
    row.iter().map(|&z| z as f64 - lse).collect()
}

/// Shared pieces of both model kinds: token and position embeddings plus an
/// encoder stack.
#[derive(Debug, Clone)]
struct EncoderStack {
    tok: ParamId,
    pos: ParamId,
    layers: Vec<EncoderLayer>,
    ln: LayerNorm,
    max_len: usize,
}

impl EncoderStack {
    fn new(store: &mut ParamStore, cfg: &BackboneConfig, tok: ParamId, max_len: usize, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.d_model;
        let pos = store.add("enc.pos", Matrix::randn(max_len, d, 0.1, rng));
        let layers = (0..cfg.encoder_layers)
            .map(|i| EncoderLayer::new(store, &format!("enc.{i}"), d, cfg.heads, cfg.ff_dim, rng))
            .collect();
        let ln = LayerNorm::new(store, "enc.ln", d);
        EncoderStack {
            tok,
            pos,
            layers,
            ln,
            max_len,
        }
    }

    fn forward(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let ids = &ids[..ids.len().min(self.max_len)];
        let positions: Vec<usize> = (0..ids.len()).collect();
        let t = g.embed(self.tok, ids);
        let p = g.embed(self.pos, &positions);
        let mut x = g.add(t, p);
        for layer in &self.layers {
            x = layer.forward(g, x);
        }
        self.ln.forward(g, x)
    }
}

/// Parameter layout of [`Seq2SeqModel`]; every method reads weights from
/// the store it is given, so training can borrow the store separately.
#[derive(Debug, Clone)]
pub struct Seq2SeqArch {
    pub max_output_len: usize,
    encoder: EncoderStack,
    dec_pos: ParamId,
    decoder: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
    head: Linear,
}

impl Seq2SeqArch {
    fn encode(&self, g: &mut Graph, src: &[usize]) -> Var {
        self.encoder.forward(g, src)
    }

    /// Decoder logits for every position of `dec_in`, or only the last one.
    fn decode(&self, g: &mut Graph, memory: Var, dec_in: &[usize], last_only: bool) -> Var {
        let positions: Vec<usize> = (0..dec_in.len()).collect();
        let t = g.embed(self.encoder.tok, dec_in);
        let p = g.embed(self.dec_pos, &positions);
        let mut x = g.add(t, p);
        for layer in &self.decoder {
            x = layer.forward(g, x, memory);
        }
        let mut x = self.dec_ln.forward(g, x);
        if last_only {
            x = g.slice_rows(x, dec_in.len() - 1, dec_in.len());
        }
        self.head.forward(g, x)
    }

    /// Decoder input `<bos> y` and targets `y <eos>`, with `y` cut to fit.
    fn teacher_forcing(&self, tgt: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let y = &tgt[..tgt.len().min(self.max_output_len - 1)];
        let mut dec_in = vec![BOS];
        dec_in.extend_from_slice(y);
        let mut targets = y.to_vec();
        targets.push(EOS);
        (dec_in, targets)
    }

    /// `−log P(tgt <eos> | src)` summed over tokens, with gradients.
    pub fn loss_and_grads(&self, store: &ParamStore, src: &[usize], tgt: &[usize]) -> (f64, Grads) {
        let mut g = Graph::new(store);
        let memory = self.encode(&mut g, src);
        let (dec_in, targets) = self.teacher_forcing(tgt);
        let logits = self.decode(&mut g, memory, &dec_in, false);
        let loss = g.cross_entropy(logits, &targets);
        let value = g.last_loss();
        (value, g.backward(loss))
    }

    pub fn loss(&self, store: &ParamStore, src: &[usize], tgt: &[usize]) -> f64 {
        let mut g = Graph::new(store);
        let memory = self.encode(&mut g, src);
        let (dec_in, targets) = self.teacher_forcing(tgt);
        let logits = self.decode(&mut g, memory, &dec_in, false);
        g.cross_entropy(logits, &targets);
        g.last_loss()
    }

    fn memory(&self, store: &ParamStore, src: &[usize]) -> Matrix {
        let mut g = Graph::new(store);
        let m = self.encode(&mut g, src);
        g.value(m).clone()
    }

    fn step_log_probs(&self, store: &ParamStore, memory: &Matrix, prefix: &[usize]) -> Vec<f64> {
        let mut g = Graph::new(store);
        let mem = g.input(memory.clone());
        let mut dec_in = vec![BOS];
        dec_in.extend_from_slice(prefix);
        let logits = self.decode(&mut g, mem, &dec_in, true);
        log_softmax(g.value(logits).row(0))
    }
}

/// Conditional generator `P(y | p)` with teacher-forced training.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub config: BackboneConfig,
    pub vocab_size: usize,
    pub max_input_len: usize,
    pub max_output_len: usize,
    pub store: ParamStore,
    pub arch: Seq2SeqArch,
}

impl Seq2SeqModel {
    pub fn new(config: BackboneConfig, vocab_size: usize, max_input_len: usize, max_output_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let d = config.d_model;
        let tok = store.add("tok", Matrix::randn(vocab_size, d, (1.0 / d as f32).sqrt(), &mut rng));
        let encoder = EncoderStack::new(&mut store, &config, tok, max_input_len, &mut rng);
        let dec_pos = store.add("dec.pos", Matrix::randn(max_output_len, d, 0.1, &mut rng));
        let decoder = (0..config.decoder_layers)
            .map(|i| DecoderLayer::new(&mut store, &format!("dec.{i}"), d, config.heads, config.ff_dim, &mut rng))
            .collect();
        let dec_ln = LayerNorm::new(&mut store, "dec.ln", d);
        let head = Linear::new(&mut store, "head", d, vocab_size, &mut rng);
        Seq2SeqModel {
            config,
            vocab_size,
            max_input_len,
            max_output_len,
            store,
            arch: Seq2SeqArch {
                max_output_len,
                encoder,
                dec_pos,
                decoder,
                dec_ln,
                head,
            },
        }
    }

    pub fn loss_and_grads(&self, src: &[usize], tgt: &[usize]) -> (f64, Grads) {
        self.arch.loss_and_grads(&self.store, src, tgt)
    }

    /// Teacher-forced loss without gradients.
    pub fn loss(&self, src: &[usize], tgt: &[usize]) -> f64 {
        self.arch.loss(&self.store, src, tgt)
    }

    /// Scoring interface: `log P(· | src, prefix)` over the vocabulary, with
    /// the decoder re-run on `<bos> prefix` alone.
    pub fn next_token_log_probs(&self, src: &[usize], prefix: &[usize]) -> Vec<f64> {
        let memory = self.arch.memory(&self.store, src);
        self.arch.step_log_probs(&self.store, &memory, prefix)
    }

    /// Decode up to `max_len` tokens (`<eos>` excluded); `beam <= 1` is
    /// greedy. Ties go to the lower token id.
    pub fn generate(&self, src: &[usize], max_len: usize, beam: usize) -> Vec<usize> {
        let max_len = max_len.min(self.max_output_len - 1);
        let memory = self.arch.memory(&self.store, src);
        let step = |prefix: &[usize]| self.arch.step_log_probs(&self.store, &memory, prefix);
        if beam <= 1 {
            let mut out = Vec::new();
            while out.len() < max_len {
                let next = argmax(&step(&out));
                if next == EOS {
                    break;
                }
                out.push(next);
            }
            return out;
        }
        let mut live: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
        let mut done: Vec<(Vec<usize>, f64)> = Vec::new();
        while !live.is_empty() {
            let mut cand: Vec<(Vec<usize>, f64, bool)> = Vec::new();
            for (seq, score) in &live {
                if seq.len() >= max_len {
                    cand.push((seq.clone(), *score, true));
                    continue;
                }
                let lp = step(seq);
                let mut order: Vec<usize> = (0..lp.len()).collect();
                order.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
                for &tok in order.iter().take(beam) {
                    let mut next = seq.clone();
                    if tok != EOS {
                        next.push(tok);
                    }
                    cand.push((next, score + lp[tok], tok == EOS));
                }
            }
            cand.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            live.clear();
            for (seq, score, finished) in cand.into_iter().take(beam) {
                if finished {
                    done.push((seq, score));
                } else {
                    live.push((seq, score));
                }
            }
            if done.len() >= beam {
                break;
            }
        }
        let norm = |s: &(Vec<usize>, f64)| s.1 / (s.0.len() + 1) as f64;
        done.into_iter()
            .max_by(|a, b| norm(a).total_cmp(&norm(b)).then_with(|| b.0.cmp(&a.0)))
            .map(|(seq, _)| seq)
            .unwrap_or_default()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Parameter layout of [`EncoderClassifierModel`].
#[derive(Debug, Clone)]
pub struct EncoderClassifierArch {
    encoder: EncoderStack,
    head: Linear,
}

impl EncoderClassifierArch {
    /// `ids` must start with the pooling token.
    fn logits_var(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let h = self.encoder.forward(g, ids);
        let first = g.slice_rows(h, 0, 1);
        self.head.forward(g, first)
    }

    pub fn logits(&self, store: &ParamStore, ids: &[usize]) -> Vec<f64> {
        let mut g = Graph::new(store);
        let z = self.logits_var(&mut g, ids);
        g.value(z).data.iter().map(|&v| v as f64).collect()
    }

    pub fn loss_and_grads(&self, store: &ParamStore, ids: &[usize], class: usize) -> (f64, Grads) {
        let mut g = Graph::new(store);
        let z = self.logits_var(&mut g, ids);
        let loss = g.cross_entropy(z, &[class]);
        let value = g.last_loss();
        (value, g.backward(loss))
    }
}

/// Encoder with a linear head on the first position's hidden state.
#[derive(Debug, Clone)]
pub struct EncoderClassifierModel {
    pub config: BackboneConfig,
    pub vocab_size: usize,
    pub classes: usize,
    pub max_len: usize,
    pub store: ParamStore,
    pub arch: EncoderClassifierArch,
}

impl EncoderClassifierModel {
    pub fn new(config: BackboneConfig, vocab_size: usize, classes: usize, max_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let d = config.d_model;
        let tok = store.add("tok", Matrix::randn(vocab_size, d, (1.0 / d as f32).sqrt(), &mut rng));
        let encoder = EncoderStack::new(&mut store, &config, tok, max_len, &mut rng);
        let head = Linear::new(&mut store, "cls", d, classes, &mut rng);
        EncoderClassifierModel {
            config,
            vocab_size,
            classes,
            max_len,
            store,
            arch: EncoderClassifierArch { encoder, head },
        }
    }

    pub fn logits(&self, ids: &[usize]) -> Vec<f64> {
        self.arch.logits(&self.store, ids)
    }

    pub fn loss_and_grads(&self, ids: &[usize], class: usize) -> (f64, Grads) {
        self.arch.loss_and_grads(&self.store, ids, class)
    }
}
