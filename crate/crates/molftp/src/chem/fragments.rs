//! Circular fragment enumeration.
//!
//! Follows the ECFP update scheme: every atom starts from an invariant code
//! derived from its local properties, and each round mixes an atom's code
//! with the sorted (bond order, neighbor code) pairs of its neighbors. The
//! code an atom holds after round `r` identifies its bonded neighborhood out
//! to radius `r`, so equal keys across molecules mean isomorphic
//! environments (up to 64-bit hash collisions, which we accept as
//! negligible and do not attempt to resolve).
//!
//! Keys are full 64-bit values — there is no folding into a fixed-width bit
//! vector. Hits are emitted per (key, depth, center) and symmetric atoms all
//! keep their own hits; deduplication happens only in `key_presence`.

use std::collections::{BTreeMap, BTreeSet};

use super::Molecule;

/// One atom-centered fragment occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FragmentHit {
    /// 64-bit environment identifier.
    pub key: u64,
    /// Radius of the environment around the center atom.
    pub depth: u8,
    /// Index of the center atom in the parsed molecule.
    pub center: u32,
    /// Occurrences of this exact (key, depth, center): always 1, kept as a
    /// field so downstream accumulation code reads uniformly.
    pub count: u32,
}

/// All fragment hits of one molecule, with presence/count summaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentIndex {
    /// Dataset row the molecule came from.
    pub molecule_id: usize,
    /// Hits in deterministic order: depth-major, then center atom.
    pub hits: Vec<FragmentHit>,
    /// Distinct keys over all hits.
    pub key_presence: BTreeSet<u64>,
    /// Occurrence count per key (over all depths and centers).
    pub key_counts: BTreeMap<u64, u32>,
    /// Number of atoms, kept for vectorization.
    pub atom_count: usize,
    /// Radius the enumeration ran at; per-molecule score tables carry
    /// `radius + 1` depth columns so a dataset vectorizes uniformly.
    pub radius: u8,
    /// Largest depth at which this molecule actually has hits (bounded by
    /// both `radius` and the molecule's diameter).
    pub max_depth: u8,
}

/// splitmix64 finalizer: a cheap, well-mixed, platform-stable bijection.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold one value into a running hash state. Non-commutative, so the order
/// of absorbed values matters (callers sort where order must not).
fn absorb(state: u64, value: u64) -> u64 {
    mix64(state ^ value.wrapping_add(0x9E37_79B9_7F4A_7C15))
}

/// Domain separators so atom invariants and neighborhood updates can never
/// collide structurally.
const SEED_INVARIANT: u64 = 0x6D6F_6C66_7470_3149; // "molftp1I"
const SEED_UPDATE: u64 = 0x6D6F_6C66_7470_3155; // "molftp1U"

/// Per-atom seed codes from (element, degree, charge, total H, ring flag,
/// aromatic flag). Equal tuples give equal codes on every platform and run.
#[must_use]
pub fn initial_invariants(mol: &Molecule) -> Vec<u64> {
    (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            let mut h = SEED_INVARIANT;
            h = absorb(h, u64::from(a.element.atomic_number()));
            h = absorb(h, mol.degree(i) as u64);
            h = absorb(h, a.formal_charge as u64); // sign-extended; stable
            h = absorb(h, u64::from(a.total_h()));
            h = absorb(h, u64::from(a.ring_member));
            h = absorb(h, u64::from(a.aromatic));
            h
        })
        .collect()
}

/// Enumerate circular fragments for radii 0..=`max_radius`.
///
/// Every atom yields one hit per radius until its neighborhood saturates
/// (radius = atom eccentricity within its component); beyond that the
/// environment stops growing and no further hits are emitted.
#[must_use]
pub fn enumerate_fragments(mol: &Molecule, molecule_id: usize, max_radius: u8) -> FragmentIndex {
    let n = mol.atom_count();
    let ecc = mol.eccentricities();
    let mut codes = initial_invariants(mol);
    let mut hits = Vec::new();
    let mut max_depth_seen = 0u8;

    for (atom, &code) in codes.iter().enumerate() {
        hits.push(FragmentHit {
            key: code,
            depth: 0,
            center: atom as u32,
            count: 1,
        });
    }

    let mut next = vec![0u64; n];
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for depth in 1..=max_radius {
        if n == 0 {
            break;
        }
        // One ECFP round: every code advances (neighbors may still need the
        // value), but hits are only emitted while the environment grows.
        for atom in 0..n {
            let mut h = absorb(SEED_UPDATE, codes[atom]);
            pairs.clear();
            for &(nb, bi) in mol.neighbors(atom) {
                pairs.push((mol.bonds()[bi].order.code(), codes[nb]));
            }
            pairs.sort_unstable();
            for &(order, code) in &pairs {
                h = absorb(h, order);
                h = absorb(h, code);
            }
            next[atom] = h;
        }
        std::mem::swap(&mut codes, &mut next);
        let mut emitted = false;
        for atom in 0..n {
            if u32::from(depth) <= ecc[atom] {
                hits.push(FragmentHit {
                    key: codes[atom],
                    depth,
                    center: atom as u32,
                    count: 1,
                });
                emitted = true;
            }
        }
        if emitted {
            max_depth_seen = depth;
        } else {
            break; // every neighborhood saturated; nothing further can appear
        }
    }

    let mut key_presence = BTreeSet::new();
    let mut key_counts = BTreeMap::new();
    for hit in &hits {
        key_presence.insert(hit.key);
        *key_counts.entry(hit.key).or_insert(0u32) += 1;
    }
    FragmentIndex {
        molecule_id,
        hits,
        key_presence,
        key_counts,
        atom_count: n,
        radius: max_radius,
        max_depth: max_depth_seen,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn index(smiles: &str, radius: u8) -> FragmentIndex {
        enumerate_fragments(&parse_smiles(smiles).unwrap(), 0, radius)
    }

    fn distinct_keys_at_depth(idx: &FragmentIndex, depth: u8) -> BTreeSet<u64> {
        idx.hits
            .iter()
            .filter(|h| h.depth == depth)
            .map(|h| h.key)
            .collect()
    }

    #[test]
    fn ethanol_keys_per_radius() {
        let idx = index("CCO", 1);
        // Three distinct environments at r=0 (terminal C, middle C, O) and
        // three distinct 1-neighborhoods.
        assert_eq!(distinct_keys_at_depth(&idx, 0).len(), 3);
        assert_eq!(distinct_keys_at_depth(&idx, 1).len(), 3);
        assert_eq!(idx.hits.len(), 6);
    }

    #[test]
    fn the_two_ethanol_carbons_have_distinct_invariants() {
        let mol = parse_smiles("CCO").unwrap();
        let inv = initial_invariants(&mol);
        assert_ne!(inv[0], inv[1], "degree 1 vs degree 2");
        assert_ne!(inv[0], inv[2], "C vs O");
    }

    #[test]
    fn methane_yields_a_single_hit_at_any_radius() {
        let idx = index("C", 6);
        assert_eq!(idx.hits.len(), 1);
        assert_eq!(idx.hits[0].depth, 0);
        assert_eq!(idx.max_depth, 0);
    }

    #[test]
    fn carbon_and_nitrogen_invariants_differ() {
        let c = parse_smiles("C").unwrap();
        let n = parse_smiles("N").unwrap();
        assert_ne!(initial_invariants(&c)[0], initial_invariants(&n)[0]);
    }

    #[test]
    fn benzene_symmetry_collapses_to_one_key_per_radius() {
        let idx = index("c1ccccc1", 2);
        for depth in 0..=2 {
            let at_depth: Vec<_> = idx.hits.iter().filter(|h| h.depth == depth).collect();
            assert_eq!(at_depth.len(), 6, "six hits at depth {depth}");
            assert_eq!(
                distinct_keys_at_depth(&idx, depth).len(),
                1,
                "one distinct key at depth {depth}"
            );
        }
        assert_eq!(idx.hits.len(), 18);
        assert_eq!(idx.key_presence.len(), 3);
        assert_eq!(
            idx.key_counts.values().copied().collect::<Vec<_>>(),
            vec![6, 6, 6]
        );
    }

    #[test]
    fn hit_count_is_sum_of_saturating_depths() {
        for (smiles, radius) in [("CCO", 3u8), ("c1ccccc1", 6), ("CC(C)(C)C", 2), ("CC.O", 4)] {
            let mol = parse_smiles(smiles).unwrap();
            let idx = enumerate_fragments(&mol, 0, radius);
            let expected: usize = mol
                .eccentricities()
                .iter()
                .map(|&e| 1 + (e.min(u32::from(radius)) as usize))
                .sum();
            assert_eq!(idx.hits.len(), expected, "{smiles} at R={radius}");
        }
    }

    #[test]
    fn atom_order_insensitivity() {
        // Same molecule written with different atom orders must give the
        // same multiset of (key, depth) hits.
        let variants = [
            ("CCO", "OCC"),
            ("C(F)(Cl)Br", "C(Cl)(Br)F"),
            ("Cc1ccccc1", "c1ccccc1C"),
            ("C1CC1O", "OC1CC1"),
            ("CC(=O)N", "NC(=O)C"),
        ];
        for (a, b) in variants {
            let mut ha: Vec<(u64, u8)> =
                index(a, 4).hits.iter().map(|h| (h.key, h.depth)).collect();
            let mut hb: Vec<(u64, u8)> =
                index(b, 4).hits.iter().map(|h| (h.key, h.depth)).collect();
            ha.sort_unstable();
            hb.sort_unstable();
            assert_eq!(ha, hb, "{a} vs {b}");
        }
    }

    #[test]
    fn deeper_radius_preserves_shallow_keys() {
        for smiles in ["CCO", "c1ccc2ccccc2c1", "CC(C)CC(=O)O"] {
            let small = index(smiles, 2);
            let large = index(smiles, 3);
            let small_hits: Vec<_> = small.hits.iter().collect();
            let shallow: Vec<_> = large.hits.iter().filter(|h| h.depth <= 2).collect();
            assert_eq!(small_hits, shallow, "{smiles}");
        }
    }

    #[test]
    fn determinism_across_runs() {
        let a = index("CC(C)c1ccc(O)cc1", 6);
        let b = index("CC(C)c1ccc(O)cc1", 6);
        assert_eq!(a, b);
    }

    #[test]
    fn presence_matches_hits() {
        let idx = index("CC(N)C(=O)O", 6);
        let from_hits: BTreeSet<u64> = idx.hits.iter().map(|h| h.key).collect();
        assert_eq!(idx.key_presence, from_hits);
        let total: u32 = idx.key_counts.values().sum();
        assert_eq!(total as usize, idx.hits.len());
    }
}
