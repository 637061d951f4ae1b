//! Seeded synthetic dataset generator.
//!
//! Molecules are concatenations of hand-vetted SMILES tokens (each token
//! closes its own rings and leaves spare valence at both join points, so
//! any sequence parses). Two corpus shapes cover the desk-scale runs:
//!
//! * `Planted` — templates carrying a class-specific motif are resampled
//!   with replacement, so most fragments recur across molecules and the
//!   motif fragments genuinely predict the label. Tunable label noise.
//! * `LeakProbe` — every molecule is unique and labels are a balanced
//!   coin flip, so deep fragments are molecule-private and *perfectly*
//!   encode their own molecule's label in full-data tables while shared
//!   shallow fragments carry nothing. Built to expose leakage.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chem::parse_smiles;
use crate::dataset::{Dataset, DatasetRecord};

/// Tokens safe to join in any order: first and last atoms keep at least
/// one spare valence for the implicit single bonds to the neighbors.
const NEUTRAL_TOKENS: [&str; 18] = [
    "C", "CC", "CCC", "CO", "CN", "CS", "C=C", "C(C)C", "C(O)C", "C(N)C", "C(Cl)C", "C(F)C",
    "C(=O)C", "CC(C)C", "C1CCCCC1", "c1ccccc1", "C1CCNCC1", "C1CCOCC1",
];

/// Sulfonamide motif planted in positive templates.
pub const POSITIVE_MOTIF: &str = "S(=O)(=O)N";
/// Ester motif planted in negative templates.
pub const NEGATIVE_MOTIF: &str = "C(=O)OC";

/// Share of templates that receive their class motif.
const MOTIF_PROB: f64 = 0.9;
/// Average copies drawn per template in planted mode; controls how rare
/// singleton fragments are.
const COPIES_PER_TEMPLATE: f64 = 5.0;
/// Chance that a sampled copy swaps one neutral token for another.
/// Mutations mint molecule-private fragments (support 1), which is
/// exactly the population the leave-one-out bound is loosest for, so the
/// rate is kept low.
const MUTATION_PROB: f64 = 0.05;

/// Extra covariate columns the generator writes alongside every molecule.
pub const EXTRA_COLUMNS: [&str; 3] = ["atoms", "rings", "hetero_frac"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    Planted,
    LeakProbe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n_molecules: usize,
    pub seed: u64,
    /// Per-molecule chance of inverting the template label (planted mode
    /// only; leak-probe labels are already random).
    pub label_noise: f64,
    pub mode: SynthMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("need at least 2 molecules, got {0}")]
    TooFewMolecules(usize),
    #[error("label noise must lie in [0, 1], got {0}")]
    BadNoise(String),
    #[error("generated SMILES '{smiles}' failed to parse: {detail}")]
    Unparseable { smiles: String, detail: String },
}

fn covariates(smiles: &str) -> Result<Vec<f64>, SynthError> {
    let mol = parse_smiles(smiles).map_err(|e| SynthError::Unparseable {
        smiles: smiles.to_string(),
        detail: e.to_string(),
    })?;
    let atoms = mol.atom_count();
    let bonds = mol.bond_count();
    // Tokens chain into one connected component, so the cyclomatic number
    // is bonds - atoms + 1.
    let rings = (bonds + 1).saturating_sub(atoms);
    let hetero = mol
        .atoms()
        .iter()
        .filter(|a| a.element.symbol() != "C")
        .count();
    Ok(vec![
        atoms as f64,
        rings as f64,
        hetero as f64 / atoms as f64,
    ])
}

fn assemble(records: Vec<(String, bool)>) -> Result<Dataset, SynthError> {
    let records = records
        .into_iter()
        .map(|(smiles, label)| {
            covariates(&smiles).map(|extras| DatasetRecord {
                smiles,
                label,
                extras,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        records,
        extra_columns: EXTRA_COLUMNS.iter().map(|s| (*s).to_string()).collect(),
    })
}

fn planted(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<(String, bool)> {
    let n = config.n_molecules;
    let t = ((n as f64 / COPIES_PER_TEMPLATE).round() as usize).max(2);
    // Alternating labels keep tiny corpora two-class by construction.
    let mut templates: Vec<(Vec<&str>, bool)> = Vec::with_capacity(t);
    for i in 0..t {
        let label = i % 2 == 0;
        let len = rng.gen_range(3..=6);
        let mut tokens: Vec<&str> = (0..len)
            .map(|_| *NEUTRAL_TOKENS.choose(rng).expect("non-empty"))
            .collect();
        if rng.gen_bool(MOTIF_PROB) {
            let motif = if label {
                POSITIVE_MOTIF
            } else {
                NEGATIVE_MOTIF
            };
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, motif);
        }
        templates.push((tokens, label));
    }

    // Two guaranteed copies per template keep template-private fragments
    // off support 1; the rest of the corpus resamples uniformly.
    let mut draws: Vec<usize> = (0..t).flat_map(|i| [i, i]).collect();
    while draws.len() < n {
        draws.push(rng.gen_range(0..t));
    }
    draws.shuffle(rng);
    draws.truncate(n);

    draws
        .into_iter()
        .map(|pick| {
            let (tokens, label) = &templates[pick];
            let mut tokens = tokens.clone();
            if rng.gen_bool(MUTATION_PROB) {
                let neutral: Vec<usize> = (0..tokens.len())
                    .filter(|&i| tokens[i] != POSITIVE_MOTIF && tokens[i] != NEGATIVE_MOTIF)
                    .collect();
                if let Some(&at) = neutral.choose(rng) {
                    tokens[at] = NEUTRAL_TOKENS.choose(rng).expect("non-empty");
                }
            }
            let label = if config.label_noise > 0.0 && rng.gen_bool(config.label_noise) {
                !*label
            } else {
                *label
            };
            (tokens.concat(), label)
        })
        .collect()
}

/// Tags distinguishing the twins of a leak-probe pair.
const PROBE_TAGS: [&str; 6] = ["CC", "CO", "CN", "C(C)C", "C(=O)C", "C1CCCCC1"];

/// Leak-probe corpora are twin pairs: one unique backbone emitted twice
/// with opposite labels, differing only in a one-token tail tag. Every
/// fragment away from the tag then occurs in exactly one positive and one
/// negative molecule, so its full-data association is zero by
/// construction; all label signal lives in the molecule-private fragments
/// around the tag, which full-data scoring encodes perfectly and a
/// train-fold mask removes entirely. A short fixed spacer before the tag
/// keeps the tag's shallow neighborhoods identical corpus-wide (high
/// support, no usable tilt), so surviving masked features carry as little
/// residue as possible.
fn leak_probe(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<(String, bool)> {
    let n = config.n_molecules;
    let mut seen = HashSet::with_capacity(n);
    let mut out = Vec::with_capacity(n + 1);
    // Signed positive-minus-negative count per tag; greedily steering it
    // toward zero keeps every tag's label distribution balanced, so tag
    // fragments carry no corpus-level association either.
    let mut tag_balance = [0i64; PROBE_TAGS.len()];
    while out.len() < n {
        let len = rng.gen_range(4..=7);
        let mut backbone: String = (0..len)
            .map(|_| *NEUTRAL_TOKENS.choose(rng).expect("non-empty"))
            .collect();
        backbone.push_str("CCC");
        let a = rng.gen_range(0..PROBE_TAGS.len());
        let b = loop {
            let i = rng.gen_range(0..PROBE_TAGS.len());
            if i != a {
                break i;
            }
        };
        let first = format!("{backbone}{}", PROBE_TAGS[a]);
        let second = format!("{backbone}{}", PROBE_TAGS[b]);
        if seen.contains(&first) || seen.contains(&second) {
            continue;
        }
        seen.insert(first.clone());
        seen.insert(second.clone());
        let first_is_positive = match tag_balance[a].cmp(&tag_balance[b]) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => rng.gen_bool(0.5),
        };
        let sign = if first_is_positive { 1 } else { -1 };
        tag_balance[a] += sign;
        tag_balance[b] -= sign;
        out.push((first, first_is_positive));
        out.push((second, !first_is_positive));
    }
    out.truncate(n);
    out
}

/// Generate a seeded synthetic dataset with the covariate columns
/// `atoms`, `rings`, and `hetero_frac` attached.
pub fn generate(config: &SynthConfig) -> Result<Dataset, SynthError> {
    if config.n_molecules < 2 {
        return Err(SynthError::TooFewMolecules(config.n_molecules));
    }
    if !(0.0..=1.0).contains(&config.label_noise) {
        return Err(SynthError::BadNoise(config.label_noise.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let raw = match config.mode {
        SynthMode::Planted => planted(config, &mut rng),
        SynthMode::LeakProbe => leak_probe(config, &mut rng),
    };
    assemble(raw)
}

/// Comment lines describing a generation run, for the output file header.
#[must_use]
pub fn generation_header(config: &SynthConfig) -> Vec<String> {
    let mode = match config.mode {
        SynthMode::Planted => "planted",
        SynthMode::LeakProbe => "leak_probe",
    };
    vec![
        format!("# generator = {mode}"),
        format!("# n_molecules = {}", config.n_molecules),
        format!("# seed = {}", config.seed),
        format!("# label_noise = {}", config.label_noise),
    ]
}
