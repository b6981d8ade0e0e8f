//! Self-describing textual model checkpoints.
//!
//! The container holds the model configuration, label scheme, vocabulary
//! hashes of the tables the model was trained against, optional source
//! paths, arbitrary `extra` provenance pairs, and every parameter tensor
//! with its shape. Tensor values are written as the hexadecimal bit
//! patterns of the 64-bit floats, so save/load round-trips are bit-exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::LabelScheme;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{
    AttentionBlock, ConvBlock, ModelConfig, ModelParameters, Mode, SoftmaxLayer, TunedEmbeddings,
};

const MAGIC: &str = "lexcnn-checkpoint v1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParameters,
    pub scheme: LabelScheme,
    pub oov_seed: u64,
    pub emb_vocab_hash: u64,
    pub lex_vocab_hash: Option<u64>,
    pub emb_path: Option<String>,
    pub lex_path: Option<String>,
    /// Effective-configuration echo, preserved verbatim in order.
    pub extra: Vec<(String, String)>,
}

fn write_tensor(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    let _ = writeln!(out, "tensor\t{name}\t{rows}\t{cols}");
    for r in 0..rows {
        let mut line = String::with_capacity(cols * 17);
        for c in 0..cols {
            if c > 0 {
                line.push(' ');
            }
            let _ = write!(line, "{:016x}", data[r * cols + c].to_bits());
        }
        out.push_str(&line);
        out.push('\n');
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, header: &str, path: &Path) -> Result<()> {
    let p = &ckpt.params;
    let cfg = &p.config;
    let mut out = String::new();
    out.push_str(header);
    out.push_str(MAGIC);
    out.push('\n');

    let join = |xs: &[usize]| {
        xs.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut meta = |k: &str, v: String| {
        let _ = writeln!(out, "meta\t{k}\t{v}");
    };
    meta("mode", cfg.mode.to_string());
    meta("eav", cfg.eav.to_string());
    meta("word_filter_lengths", join(&cfg.word_filter_lengths));
    meta("lex_filter_lengths", join(&cfg.lex_filter_lengths));
    meta("word_filters", cfg.word_filters.to_string());
    meta("lex_filters", cfg.lex_filters.to_string());
    meta("word_attn_filters", cfg.word_attn_filters.to_string());
    meta("lex_attn_filters", cfg.lex_attn_filters.to_string());
    meta("d", p.d.to_string());
    meta("e", p.e.to_string());
    meta("classes", p.classes.to_string());
    meta("scheme", ckpt.scheme.to_string());
    meta("oov_seed", ckpt.oov_seed.to_string());
    meta("emb_vocab_hash", format!("{:016x}", ckpt.emb_vocab_hash));
    if let Some(h) = ckpt.lex_vocab_hash {
        meta("lex_vocab_hash", format!("{h:016x}"));
    }
    if let Some(path) = &ckpt.emb_path {
        meta("emb_path", path.clone());
    }
    if let Some(path) = &ckpt.lex_path {
        meta("lex_path", path.clone());
    }
    for (k, v) in &ckpt.extra {
        let _ = writeln!(out, "extra\t{k}\t{v}");
    }

    if let Some(tuned) = &p.tuned {
        let _ = writeln!(out, "words\t{}", tuned.words().len());
        for w in tuned.words() {
            let _ = writeln!(out, "word\t{w}");
        }
    }

    for (li, m) in p.word_conv.weights.iter().enumerate() {
        write_tensor(&mut out, &format!("word_conv.w{li}"), m.rows(), m.cols(), m.data());
    }
    write_tensor(&mut out, "word_conv.b", 1, p.word_conv.biases.len(), &p.word_conv.biases);
    if let Some(b) = &p.lex_conv {
        for (li, m) in b.weights.iter().enumerate() {
            write_tensor(&mut out, &format!("lex_conv.w{li}"), m.rows(), m.cols(), m.data());
        }
        write_tensor(&mut out, "lex_conv.b", 1, b.biases.len(), &b.biases);
    }
    if let Some(a) = &p.word_attn {
        write_tensor(&mut out, "word_attn.w", a.filters.rows(), a.filters.cols(), a.filters.data());
        write_tensor(&mut out, "word_attn.b", 1, a.biases.len(), &a.biases);
    }
    if let Some(a) = &p.lex_attn {
        write_tensor(&mut out, "lex_attn.w", a.filters.rows(), a.filters.cols(), a.filters.data());
        write_tensor(&mut out, "lex_attn.b", 1, a.biases.len(), &a.biases);
    }
    write_tensor(
        &mut out,
        "softmax.w",
        p.softmax.weights.rows(),
        p.softmax.weights.cols(),
        p.softmax.weights.data(),
    );
    write_tensor(&mut out, "softmax.b", 1, p.softmax.biases.len(), &p.softmax.biases);
    if let Some(t) = &p.tuned {
        write_tensor(&mut out, "tuned", t.matrix.rows(), t.matrix.cols(), t.matrix.data());
    }
    out.push_str("end\n");
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Reader<R: BufRead> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    path: String,
}

impl<R: BufRead> Reader<R> {
    fn next_line(&mut self) -> Result<Option<(usize, String)>> {
        for (idx, line) in self.lines.by_ref() {
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(Some((idx + 1, line)));
        }
        Ok(None)
    }
}

fn parse_hex_row(path: &str, lineno: usize, line: &str, cols: usize) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(cols);
    for tok in line.split(' ') {
        let bits = u64::from_str_radix(tok, 16)
            .map_err(|_| Error::parse(path, lineno, format!("bad tensor value `{tok}`")))?;
        row.push(f64::from_bits(bits));
    }
    if row.len() != cols {
        return Err(Error::parse(
            path,
            lineno,
            format!("expected {cols} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut reader = Reader {
        lines: BufReader::new(file).lines().enumerate(),
        path: display.clone(),
    };

    match reader.next_line()? {
        Some((_, line)) if line == MAGIC => {}
        Some((lineno, _)) => {
            return Err(Error::parse(&display, lineno, "not a checkpoint file"))
        }
        None => return Err(Error::Data(format!("{display}: empty checkpoint"))),
    }

    let mut meta: HashMap<String, String> = HashMap::new();
    let mut extra = Vec::new();
    let mut words: Vec<String> = Vec::new();
    let mut tensors: HashMap<String, Matrix> = HashMap::new();
    let mut saw_end = false;

    while let Some((lineno, line)) = reader.next_line()? {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "meta" if fields.len() == 3 => {
                meta.insert(fields[1].to_string(), fields[2].to_string());
            }
            "extra" if fields.len() == 3 => {
                extra.push((fields[1].to_string(), fields[2].to_string()));
            }
            "words" if fields.len() == 2 => {
                let count: usize = fields[1]
                    .parse()
                    .map_err(|_| Error::parse(&display, lineno, "bad word count"))?;
                words.reserve(count);
            }
            "word" if fields.len() == 2 => {
                words.push(fields[1].to_string());
            }
            "tensor" if fields.len() == 4 => {
                let name = fields[1].to_string();
                let rows: usize = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(&display, lineno, "bad tensor rows"))?;
                let cols: usize = fields[3]
                    .parse()
                    .map_err(|_| Error::parse(&display, lineno, "bad tensor cols"))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (rl, row) = reader.next_line()?.ok_or_else(|| {
                        Error::Data(format!("{display}: truncated tensor `{name}`"))
                    })?;
                    data.extend(parse_hex_row(&display, rl, &row, cols)?);
                }
                tensors.insert(name, Matrix::from_vec(rows, cols, data));
            }
            "end" => {
                saw_end = true;
                break;
            }
            other => {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("unknown record `{other}`"),
                ));
            }
        }
    }
    if !saw_end {
        return Err(Error::Data(format!("{display}: truncated checkpoint")));
    }

    let get = |k: &str| -> Result<&String> {
        meta.get(k)
            .ok_or_else(|| Error::Data(format!("{display}: missing meta `{k}`")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::Data(format!("{display}: bad meta `{k}`")))
    };
    let parse_lengths = |k: &str| -> Result<Vec<usize>> {
        get(k)?
            .split(',')
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Data(format!("{display}: bad meta `{k}`")))
            })
            .collect()
    };

    let config = ModelConfig {
        mode: Mode::parse(get("mode")?)?,
        eav: get("eav")? == "true",
        word_filter_lengths: parse_lengths("word_filter_lengths")?,
        lex_filter_lengths: parse_lengths("lex_filter_lengths")?,
        word_filters: parse_usize("word_filters")?,
        lex_filters: parse_usize("lex_filters")?,
        word_attn_filters: parse_usize("word_attn_filters")?,
        lex_attn_filters: parse_usize("lex_attn_filters")?,
    };
    let d = parse_usize("d")?;
    let e = parse_usize("e")?;
    let classes = parse_usize("classes")?;
    let scheme = LabelScheme::parse(get("scheme")?)?;
    let oov_seed: u64 = get("oov_seed")?
        .parse()
        .map_err(|_| Error::Data(format!("{display}: bad meta `oov_seed`")))?;
    let emb_vocab_hash = u64::from_str_radix(get("emb_vocab_hash")?, 16)
        .map_err(|_| Error::Data(format!("{display}: bad meta `emb_vocab_hash`")))?;
    let lex_vocab_hash = meta
        .get("lex_vocab_hash")
        .map(|v| {
            u64::from_str_radix(v, 16)
                .map_err(|_| Error::Data(format!("{display}: bad meta `lex_vocab_hash`")))
        })
        .transpose()?;

    let mut take = |name: &str, rows: usize, cols: usize| -> Result<Matrix> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| Error::Data(format!("{display}: missing tensor `{name}`")))?;
        if t.rows() != rows || t.cols() != cols {
            return Err(Error::Data(format!(
                "{display}: tensor `{name}` has shape {}x{}, expected {rows}x{cols}",
                t.rows(),
                t.cols()
            )));
        }
        Ok(t)
    };

    let word_width = config.word_width(d, e);
    let word_conv = ConvBlock {
        filter_lengths: config.word_filter_lengths.clone(),
        filters_per_length: config.word_filters,
        width: word_width,
        weights: config
            .word_filter_lengths
            .iter()
            .enumerate()
            .map(|(li, &l)| take(&format!("word_conv.w{li}"), config.word_filters, l * word_width))
            .collect::<Result<Vec<_>>>()?,
        biases: take(
            "word_conv.b",
            1,
            config.word_filters * config.word_filter_lengths.len(),
        )?
        .data()
        .to_vec(),
    };
    let lex_conv = if config.mode == Mode::Sc {
        Some(ConvBlock {
            filter_lengths: config.lex_filter_lengths.clone(),
            filters_per_length: config.lex_filters,
            width: e,
            weights: config
                .lex_filter_lengths
                .iter()
                .enumerate()
                .map(|(li, &l)| take(&format!("lex_conv.w{li}"), config.lex_filters, l * e))
                .collect::<Result<Vec<_>>>()?,
            biases: take(
                "lex_conv.b",
                1,
                config.lex_filters * config.lex_filter_lengths.len(),
            )?
            .data()
            .to_vec(),
        })
    } else {
        None
    };
    let word_attn = if config.eav {
        Some(AttentionBlock {
            filters: take("word_attn.w", config.word_attn_filters, word_width)?,
            biases: take("word_attn.b", 1, config.word_attn_filters)?.data().to_vec(),
        })
    } else {
        None
    };
    let lex_attn = if config.has_lexicon_attention() {
        Some(AttentionBlock {
            filters: take("lex_attn.w", config.lex_attn_filters, e)?,
            biases: take("lex_attn.b", 1, config.lex_attn_filters)?.data().to_vec(),
        })
    } else {
        None
    };
    let softmax = SoftmaxLayer {
        weights: take("softmax.w", config.penultimate_size(d, e), classes)?,
        biases: take("softmax.b", 1, classes)?.data().to_vec(),
    };
    let tuned = if words.is_empty() {
        None
    } else {
        let matrix = take("tuned", words.len(), d)?;
        Some(TunedEmbeddings::from_parts(words, matrix))
    };

    Ok(Checkpoint {
        params: ModelParameters {
            config,
            d,
            e,
            classes,
            word_conv,
            lex_conv,
            word_attn,
            lex_attn,
            softmax,
            tuned,
        },
        scheme,
        oov_seed,
        emb_vocab_hash,
        lex_vocab_hash,
        emb_path: meta.get("emb_path").cloned(),
        lex_path: meta.get("lex_path").cloned(),
        extra,
    })
}
