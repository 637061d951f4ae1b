//! Molecular graphs parsed from SMILES, plus the circular-fragment
//! enumeration that turns them into hashed key hits.
//!
//! The graph model is intentionally small: atoms with the handful of
//! properties that feed the fragment invariants, bonds with integer orders
//! plus an aromatic order, and adjacency lists. Aromaticity is taken on
//! faith from the input notation (lowercase atoms / `:` bonds); there is no
//! perception pass, no canonicalization, and no stereochemistry.

pub mod fragments;
mod smiles;

pub use fragments::{enumerate_fragments, initial_invariants, FragmentHit, FragmentIndex};
pub use smiles::{parse_smiles, SmilesError};

/// Chemical element, identified by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(u8);

/// IUPAC element symbols; index + 1 is the atomic number.
const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

impl Element {
    /// Look up an element by its exact symbol (`"C"`, `"Cl"`, ...).
    #[must_use]
    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|&s| s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    #[must_use]
    pub fn symbol(self) -> &'static str {
        SYMBOLS[usize::from(self.0) - 1]
    }

    #[must_use]
    pub fn atomic_number(self) -> u8 {
        self.0
    }

    /// Whether the element may be written bare (outside brackets): the
    /// SMILES organic subset.
    #[must_use]
    pub fn in_organic_subset(self) -> bool {
        matches!(
            self.symbol(),
            "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I"
        )
    }

    /// Allowed total valences for implicit-hydrogen filling, in increasing
    /// order. Only organic-subset elements have entries; bracket atoms carry
    /// their hydrogens explicitly and are never filled.
    fn valences(self) -> &'static [u8] {
        match self.symbol() {
            "B" => &[3],
            "C" => &[4],
            "N" => &[3, 5],
            "O" => &[2],
            "P" => &[3, 5],
            "S" => &[2, 4, 6],
            "F" | "Cl" | "Br" | "I" => &[1],
            _ => &[],
        }
    }
}

/// Bond order; aromatic bonds are their own order rather than 1.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable small integer used when hashing fragment environments.
    #[must_use]
    pub fn code(self) -> u64 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to the integer bond-order sum used by the valence
    /// model. Aromatic bonds count 1 here; aromatic atoms add one extra
    /// unit for the delocalized system (see `Molecule::fill_hydrogens`).
    fn valence_units(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// A heavy atom in the molecular graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i32,
    /// Hydrogens written explicitly in a bracket atom.
    pub explicit_h: u8,
    /// Hydrogens added by the valence model (organic-subset atoms only).
    pub implicit_h: u8,
    pub aromatic: bool,
    /// True when the atom lies on at least one cycle; filled in after
    /// parsing by bridge detection.
    pub ring_member: bool,
}

impl Atom {
    /// Total hydrogen count, explicit plus implicit.
    #[must_use]
    pub fn total_h(&self) -> u8 {
        self.explicit_h + self.implicit_h
    }
}

/// A bond between two atoms, stored once with `a < b` not required.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Parsed molecular graph. Connectivity is not required: disconnected
/// components (salt forms, mixtures) are legal.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// adjacency[i] lists (neighbor atom index, bond index), in insertion
    /// order, symmetric by construction.
    adjacency: Vec<Vec<(usize, usize)>>,
    source_text: String,
}

impl Molecule {
    pub(crate) fn new(atoms: Vec<Atom>, bonds: Vec<Bond>, source_text: String) -> Molecule {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (bi, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, bi));
            adjacency[bond.b].push((bond.a, bi));
        }
        let mut mol = Molecule {
            atoms,
            bonds,
            adjacency,
            source_text,
        };
        mol.mark_ring_members();
        mol
    }

    #[must_use]
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    #[must_use]
    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    #[must_use]
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    #[must_use]
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    #[must_use]
    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    /// Neighbors of atom `i` as (neighbor index, bond index) pairs.
    #[must_use]
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Heavy-atom degree of atom `i`.
    #[must_use]
    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    #[must_use]
    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub(crate) fn atoms_mut(&mut self) -> &mut [Atom] {
        &mut self.atoms
    }

    /// Integer bond-order sum at atom `i` under the valence model, plus one
    /// extra unit if the atom is aromatic (standing in for the delocalized
    /// pi contribution). This keeps the arithmetic integral: a benzene
    /// carbon counts 2 (ring bonds) + 1 (pi) = 3, leaving one hydrogen.
    pub(crate) fn valence_load(&self, i: usize) -> u32 {
        let bond_sum: u32 = self.adjacency[i]
            .iter()
            .map(|&(_, bi)| u32::from(self.bonds[bi].order.valence_units()))
            .sum();
        bond_sum + u32::from(self.atoms[i].aromatic)
    }

    /// Smallest allowed valence that accommodates the bond load, or None if
    /// the load exceeds every allowed valence (a valence overflow).
    pub(crate) fn implicit_h_for(&self, i: usize) -> Option<u8> {
        let load = self.valence_load(i);
        let valences = self.atoms[i].element.valences();
        debug_assert!(!valences.is_empty(), "implicit H only for organic subset");
        for &v in valences {
            if u32::from(v) >= load {
                return Some((u32::from(v) - load) as u8);
            }
        }
        None
    }

    /// Mark atoms that lie on a cycle: an atom is a ring member when it has
    /// an incident edge that is not a bridge. Bridges are found with an
    /// iterative DFS (Tarjan low-link), so long chains cannot overflow the
    /// stack.
    fn mark_ring_members(&mut self) {
        let n = self.atoms.len();
        if n == 0 {
            return;
        }
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![usize::MAX; n];
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut timer = 0usize;
        // Explicit DFS stack: (node, incoming bond index, next neighbor slot).
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, usize::MAX, 0));
            while let Some(&mut (u, in_bond, ref mut slot)) = stack.last_mut() {
                if *slot < self.adjacency[u].len() {
                    let (v, bi) = self.adjacency[u][*slot];
                    *slot += 1;
                    if bi == in_bond {
                        continue; // don't walk back along the tree edge
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bi, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&mut (parent, _, _)) = stack.last_mut() {
                        low[parent] = low[parent].min(low[u]);
                        if low[u] > disc[parent] {
                            is_bridge[in_bond] = true;
                        }
                    }
                }
            }
        }
        for (bi, bond) in self.bonds.iter().enumerate() {
            if !is_bridge[bi] {
                self.atoms[bond.a].ring_member = true;
                self.atoms[bond.b].ring_member = true;
            }
        }
    }

    /// Eccentricity of every atom within its connected component: the
    /// longest shortest-path distance to any reachable atom. Used to stop
    /// fragment expansion once an atom's neighborhood saturates.
    #[must_use]
    pub fn eccentricities(&self) -> Vec<u32> {
        let n = self.atoms.len();
        let mut ecc = vec![0u32; n];
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..n {
            dist.iter_mut().for_each(|d| *d = u32::MAX);
            dist[start] = 0;
            queue.clear();
            queue.push_back(start);
            let mut max_d = 0;
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.adjacency[u] {
                    if dist[v] == u32::MAX {
                        dist[v] = dist[u] + 1;
                        max_d = max_d.max(dist[v]);
                        queue.push_back(v);
                    }
                }
            }
            ecc[start] = max_d;
        }
        ecc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_lookup_round_trips() {
        for sym in ["H", "C", "N", "Cl", "Br", "Se", "Og"] {
            let e = Element::from_symbol(sym).expect(sym);
            assert_eq!(e.symbol(), sym);
        }
        assert_eq!(Element::from_symbol("C").unwrap().atomic_number(), 6);
        assert_eq!(Element::from_symbol("Xx"), None);
        assert_eq!(Element::from_symbol(""), None);
    }

    #[test]
    fn organic_subset_membership() {
        for sym in ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"] {
            assert!(Element::from_symbol(sym).unwrap().in_organic_subset());
        }
        for sym in ["H", "Na", "Se", "Fe"] {
            assert!(!Element::from_symbol(sym).unwrap().in_organic_subset());
        }
    }

    #[test]
    fn ring_membership_distinguishes_ring_from_tail() {
        let mol = parse_smiles("C1CC1O").unwrap();
        let flags: Vec<bool> = mol.atoms().iter().map(|a| a.ring_member).collect();
        assert_eq!(flags, vec![true, true, true, false]);
    }

    #[test]
    fn eccentricity_of_a_path() {
        let mol = parse_smiles("CCC").unwrap();
        assert_eq!(mol.eccentricities(), vec![2, 1, 2]);
    }

    #[test]
    fn eccentricity_within_components_only() {
        // Disconnected salt: each component measures its own radius.
        let mol = parse_smiles("CC.O").unwrap();
        assert_eq!(mol.eccentricities(), vec![1, 1, 0]);
    }
}
