//! Checkpoint files: everything needed to resume training or to translate,
//! in one binary blob with bit-exact round-trips.
//!
//! Layout, all integers little-endian:
//! magic `SELNMTCP`, u32 format version, then length-prefixed run-config
//! JSON and vocabulary text, the completed step count, and two named
//! tensor tables (parameters, then paired Adam moments).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use selnmt_core::tensor::Tensor;
use selnmt_core::train::Adam;
use selnmt_core::{ModelConfig, ModelState, SeededRng, Trainer, Vocabulary};

use crate::fail::{io_fail, Failure};
use crate::runconfig::RunConfig;

const MAGIC: &[u8; 8] = b"SELNMTCP";
const VERSION: u32 = 1;

#[derive(Debug)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub vocab: Vocabulary,
    pub completed: u64,
    pub state: ModelState,
    pub opt_m: BTreeMap<String, Tensor>,
    pub opt_v: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn from_trainer(config: &RunConfig, vocab: &Vocabulary, trainer: &Trainer) -> Self {
        let (m, v) = trainer.optimizer().moments();
        Self {
            config: config.clone(),
            vocab: vocab.clone(),
            completed: trainer.completed_steps(),
            state: trainer.state().clone(),
            opt_m: m.clone(),
            opt_v: v.clone(),
        }
    }

    /// Rebuilds a trainer that continues the run exactly where it stopped.
    pub fn into_trainer(self) -> Result<(Trainer, RunConfig, Vocabulary), Failure> {
        let train = self.config.train_config();
        let opt = Adam::from_parts(
            train.beta1,
            train.beta2,
            train.adam_eps,
            self.completed,
            self.opt_m,
            self.opt_v,
        );
        let trainer =
            Trainer::resume(self.config.model_config(), train, self.state, opt, self.completed)?;
        Ok((trainer, self.config, self.vocab))
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        fs::write(path, self.to_bytes()).map_err(|e| io_fail(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, Failure> {
        let bytes = fs::read(path).map_err(|e| io_fail(path, e))?;
        Self::from_bytes(&bytes).map_err(|reason| {
            Failure::Data(format!("checkpoint {}: {reason}", path.display()))
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.config).expect("config serializes");
        put_bytes(&mut out, &config);
        let mut vocab = self.vocab.to_lines().join("\n");
        vocab.push('\n');
        put_bytes(&mut out, vocab.as_bytes());
        put_u64(&mut out, self.completed);
        put_u64(&mut out, self.state.len() as u64);
        for (name, tensor) in self.state.iter() {
            put_bytes(&mut out, name.as_bytes());
            put_tensor(&mut out, tensor);
        }
        assert_eq!(self.opt_m.len(), self.opt_v.len(), "moment tables disagree");
        put_u64(&mut out, self.opt_m.len() as u64);
        for (name, m) in &self.opt_m {
            let v = &self.opt_v[name];
            put_bytes(&mut out, name.as_bytes());
            put_tensor(&mut out, m);
            assert_eq!((v.rows(), v.cols()), (m.rows(), m.cols()), "moment shapes disagree");
            out.extend(v.data().iter().flat_map(|x| x.to_le_bytes()));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err("not a selnmt checkpoint (bad magic)".to_string());
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(format!("unsupported format version {version} (expected {VERSION})"));
        }
        let config: RunConfig = serde_json::from_slice(r.take_block()?)
            .map_err(|e| format!("embedded config: {e}"))?;
        let vocab_text =
            std::str::from_utf8(r.take_block()?).map_err(|e| format!("embedded vocabulary: {e}"))?;
        let vocab = Vocabulary::from_lines(vocab_text.lines())
            .map_err(|e| format!("embedded vocabulary: {e}"))?;
        let completed = r.take_u64()?;
        let n_params = r.take_u64()? as usize;
        let mut entries = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name = r.take_name()?;
            entries.push((name, r.take_tensor()?));
        }
        let n_moments = r.take_u64()? as usize;
        let mut opt_m = BTreeMap::new();
        let mut opt_v = BTreeMap::new();
        for _ in 0..n_moments {
            let name = r.take_name()?;
            let m = r.take_tensor()?;
            let v = r.take_raw_tensor(m.rows(), m.cols())?;
            opt_m.insert(name.clone(), m);
            opt_v.insert(name, v);
        }
        if r.at != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.at));
        }
        Ok(Self { config, vocab, completed, state: ModelState::from_entries(entries), opt_m, opt_v })
    }
}

/// Confirms a loaded state fits a config: same vocabulary size and exactly
/// the parameter names and shapes a fresh initialization would create.
pub fn check_state_matches(
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    state: &ModelState,
) -> Result<(), Failure> {
    if vocab.len() != cfg.vocab_size {
        return Err(Failure::Data(format!(
            "checkpoint mismatch: vocabulary has {} tokens but the config says {}",
            vocab.len(),
            cfg.vocab_size
        )));
    }
    let expected = ModelState::init(cfg, &mut SeededRng::new(0));
    for (name, tensor) in expected.iter() {
        if !state.contains(name) {
            return Err(Failure::Data(format!("checkpoint mismatch: missing parameter {name}")));
        }
        let got = state.get(name);
        if (got.rows(), got.cols()) != (tensor.rows(), tensor.cols()) {
            return Err(Failure::Data(format!(
                "checkpoint mismatch: parameter {name} is {}x{} but the config implies {}x{}",
                got.rows(),
                got.cols(),
                tensor.rows(),
                tensor.cols()
            )));
        }
    }
    if state.len() != expected.len() {
        let extra = state
            .names()
            .find(|n| !expected.contains(n))
            .unwrap_or("?")
            .to_string();
        return Err(Failure::Data(format!("checkpoint mismatch: unexpected parameter {extra}")));
    }
    Ok(())
}

fn put_u64(out: &mut Vec<u8>, x: u64) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_u64(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

fn put_tensor(out: &mut Vec<u8>, t: &Tensor) {
    put_u64(out, t.rows() as u64);
    put_u64(out, t.cols() as u64);
    out.extend(t.data().iter().flat_map(|x| x.to_le_bytes()));
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        if self.at + n > self.bytes.len() {
            return Err(format!("truncated at byte {}", self.at));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn take_u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn take_block(&mut self) -> Result<&'a [u8], String> {
        let len = self.take_u64()? as usize;
        self.take(len)
    }

    fn take_name(&mut self) -> Result<String, String> {
        let raw = self.take_block()?;
        String::from_utf8(raw.to_vec()).map_err(|e| format!("parameter name: {e}"))
    }

    fn take_tensor(&mut self) -> Result<Tensor, String> {
        let rows = self.take_u64()? as usize;
        let cols = self.take_u64()? as usize;
        self.take_raw_tensor(rows, cols)
    }

    fn take_raw_tensor(&mut self, rows: usize, cols: usize) -> Result<Tensor, String> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| format!("tensor shape {rows}x{cols} overflows"))?;
        let raw = self.take(n * 8)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Tensor::from_vec(rows, cols, data))
    }
}
