//! Checkpoint file: a line-oriented text format that round-trips every
//! parameter bit-exactly by writing each f64 as its 16-digit hex bit
//! pattern.
//!
//! ```text
//! ten-checkpoint v1
//! variant ten-x
//! dims 32 50 50
//! ontology 3
//! ["food",["italian","chinese","dontcare"]]
//! ...
//! vocab 57
//! "<oov>"
//! ...
//! params 62
//! embed.table 57x32 bfa47ae147ae147b ...
//! ...
//! end
//! ```
//!
//! `dims` is embedding, encoder and history widths. The ontology and
//! vocabulary are embedded so a checkpoint pins the exact slot/value and
//! token indexing its tensors were trained against; loading cross-checks
//! all of it and fails loudly on any mismatch. Only the parameters the
//! checkpoint's variant actually uses are stored.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use ten_core::model::{ModelDims, ModelLayout, Variant};
use ten_core::params::ParamStore;
use ten_core::state::Ontology;
use ten_core::tensor::Tensor;
use ten_core::vocab::Vocab;

use crate::error::CliError;

pub const CHECKPOINT_MAGIC: &str = "ten-checkpoint v1";

/// A parsed checkpoint, not yet bound to a parameter store.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub variant: Variant,
    pub dims: ModelDims,
    /// (slot name, declared values) in slot order, excluding `unknown`.
    pub ontology: Vec<(String, Vec<String>)>,
    /// Tokens in index order, starting with the reserved bucket.
    pub vocab: Vec<String>,
    /// Named tensors in canonical parameter order.
    pub params: Vec<(String, Tensor)>,
}

/// A checkpoint instantiated into a runnable model.
#[derive(Debug)]
pub struct LoadedModel {
    pub variant: Variant,
    pub ontology: Ontology,
    pub vocab: Vocab,
    pub layout: ModelLayout,
    pub store: ParamStore,
}

fn shape_token(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CliError> {
    let mut out = String::new();
    out.push_str(CHECKPOINT_MAGIC);
    out.push('\n');
    out.push_str(&format!("variant {}\n", ck.variant));
    out.push_str(&format!(
        "dims {} {} {}\n",
        ck.dims.embedding, ck.dims.encoder_hidden, ck.dims.history_hidden
    ));
    out.push_str(&format!("ontology {}\n", ck.ontology.len()));
    for slot in &ck.ontology {
        out.push_str(&serde_json::to_string(slot).expect("slot serializes"));
        out.push('\n');
    }
    out.push_str(&format!("vocab {}\n", ck.vocab.len()));
    for token in &ck.vocab {
        out.push_str(&serde_json::to_string(token).expect("token serializes"));
        out.push('\n');
    }
    out.push_str(&format!("params {}\n", ck.params.len()));
    for (name, tensor) in &ck.params {
        out.push_str(name);
        out.push(' ');
        out.push_str(&shape_token(tensor.dims()));
        for v in tensor.data() {
            out.push_str(&format!(" {:016x}", v.to_bits()));
        }
        out.push('\n');
    }
    out.push_str("end\n");
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

struct Reader<'a> {
    path: &'a Path,
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, CliError> {
        self.line_no += 1;
        self.lines.next().ok_or_else(|| {
            CliError::data(self.path, format!("line {}: expected {what}, found end of file", self.line_no))
        })
    }

    fn bad(&self, message: impl std::fmt::Display) -> CliError {
        CliError::data(self.path, format!("line {}: {message}", self.line_no))
    }

    /// Parses a `keyword <rest>` line and returns the rest.
    fn keyword(&mut self, keyword: &str) -> Result<&'a str, CliError> {
        let line = self.next(&format!("`{keyword} ...`"))?;
        line.strip_prefix(keyword)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| self.bad(format!("expected `{keyword} ...`, found {line:?}")))
    }

    fn count(&mut self, keyword: &str) -> Result<usize, CliError> {
        let rest = self.keyword(keyword)?;
        rest.parse()
            .map_err(|_| self.bad(format!("expected a count after `{keyword}`, found {rest:?}")))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut r = Reader { path, lines: text.lines(), line_no: 0 };

    let magic = r.next("the header")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(r.bad(format!("not a checkpoint: first line is {magic:?}, expected {CHECKPOINT_MAGIC:?}")));
    }
    let variant_str = r.keyword("variant")?;
    let variant = Variant::parse(variant_str).map_err(|e| r.bad(e))?;

    let dims_str = r.keyword("dims")?;
    let parts: Vec<&str> = dims_str.split(' ').collect();
    let parse_dim = |s: &&str| s.parse::<usize>().ok();
    let dims = match parts.as_slice() {
        [e, h, k] => match (parse_dim(e), parse_dim(h), parse_dim(k)) {
            (Some(embedding), Some(encoder_hidden), Some(history_hidden)) => {
                ModelDims { embedding, encoder_hidden, history_hidden }
            }
            _ => return Err(r.bad(format!("bad dims line: {dims_str:?}"))),
        },
        _ => return Err(r.bad(format!("expected three widths after `dims`, found {dims_str:?}"))),
    };

    let n_slots = r.count("ontology")?;
    let mut ontology = Vec::with_capacity(n_slots);
    for _ in 0..n_slots {
        let line = r.next("a slot definition")?;
        let slot: (String, Vec<String>) =
            serde_json::from_str(line).map_err(|e| r.bad(format!("bad slot definition: {e}")))?;
        ontology.push(slot);
    }

    let n_tokens = r.count("vocab")?;
    let mut vocab = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        let line = r.next("a token")?;
        let token: String =
            serde_json::from_str(line).map_err(|e| r.bad(format!("bad token: {e}")))?;
        vocab.push(token);
    }

    let n_params = r.count("params")?;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let line = r.next("a parameter")?;
        let mut fields = line.split(' ');
        let name = fields
            .next()
            .filter(|n| !n.is_empty())
            .ok_or_else(|| r.bad("empty parameter line"))?;
        let shape = fields
            .next()
            .ok_or_else(|| r.bad(format!("parameter {name:?} is missing its shape")))?;
        let mut dims = Vec::new();
        for d in shape.split('x') {
            dims.push(
                d.parse::<usize>()
                    .map_err(|_| r.bad(format!("parameter {name:?} has bad shape {shape:?}")))?,
            );
        }
        let expected: usize = dims.iter().product();
        let mut data = Vec::with_capacity(expected);
        for word in fields {
            let bits = u64::from_str_radix(word, 16)
                .map_err(|_| r.bad(format!("parameter {name:?}: bad hex value {word:?}")))?;
            data.push(f64::from_bits(bits));
        }
        if data.len() != expected {
            return Err(r.bad(format!(
                "parameter {name:?} declares shape {shape} ({expected} values) but carries {}",
                data.len()
            )));
        }
        let tensor = match dims.as_slice() {
            [_] => Tensor::vector(data),
            [rows, cols] => Tensor::matrix(*rows, *cols, data),
            _ => {
                return Err(r.bad(format!(
                    "parameter {name:?} has unsupported rank {} (shape {shape})",
                    dims.len()
                )))
            }
        };
        params.push((name.to_string(), tensor));
    }

    let end = r.next("`end`")?;
    if end != "end" {
        return Err(r.bad(format!("expected `end`, found {end:?}")));
    }
    Ok(Checkpoint { variant, dims, ontology, vocab, params })
}

/// Rebuilds the full model a checkpoint describes. Every parameter the
/// variant uses must be present with the right shape; the embedded
/// ontology and vocabulary become the model's own.
pub fn instantiate(path: &Path, ck: &Checkpoint) -> Result<LoadedModel, CliError> {
    let ontology = Ontology::new(ck.ontology.clone())
        .map_err(|e| CliError::data(path, format!("embedded ontology: {e}")))?;
    let vocab = Vocab::from_saved(ck.vocab.clone())
        .map_err(|e| CliError::data(path, format!("embedded vocabulary: {e}")))?;
    let mut store = ParamStore::new();
    // The seed is irrelevant: every parameter the variant reads is
    // overwritten below, and the rest are never touched by its forward
    // pass.
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let layout = ModelLayout::build(&mut store, &mut rng, &ontology, &vocab, ck.dims)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    let report = store
        .apply_named(&ck.params)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    if !report.ignored.is_empty() {
        return Err(CliError::data(
            path,
            format!(
                "checkpoint carries parameter(s) this model has no slot for: {}",
                report.ignored.join(", ")
            ),
        ));
    }
    let expected: Vec<String> = layout
        .param_ids_for(ck.variant)
        .into_iter()
        .map(|id| store.name(id).to_string())
        .collect();
    let missing: Vec<&String> =
        expected.iter().filter(|n| !report.applied.contains(n)).collect();
    if !missing.is_empty() {
        return Err(CliError::data(
            path,
            format!(
                "checkpoint is missing parameter(s) the {} variant needs: {}",
                ck.variant,
                missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    Ok(LoadedModel { variant: ck.variant, ontology, vocab, layout, store })
}

/// Convenience: read and instantiate in one step.
pub fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let ck = read_checkpoint(path)?;
    instantiate(path, &ck)
}

/// Assembles the checkpoint for a trained store, keeping only the
/// variant's own parameters, in canonical order.
pub fn checkpoint_of(
    variant: Variant,
    dims: ModelDims,
    ontology: &Ontology,
    vocab: &Vocab,
    layout: &ModelLayout,
    store: &ParamStore,
) -> Checkpoint {
    Checkpoint {
        variant,
        dims,
        ontology: ontology
            .slot_ids()
            .map(|s| (ontology.slot_name(s).to_string(), ontology.declared_values(s).to_vec()))
            .collect(),
        vocab: vocab.tokens().to_vec(),
        params: store.snapshot(layout.param_ids_for(variant)),
    }
}
