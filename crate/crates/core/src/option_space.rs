//! The tunable flag space: grouping tables, combinations over them, and
//! rendering of combinations to compiler command-line tokens.
//!
//! A [`GroupTable`] partitions a set of boolean `-f` toggles into ordered
//! groups. All flags are addressed by a flat position in *group order*
//! (groups in table order, members in listed order), which is also the bit
//! order used for [`Combination`] bitstrings.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Contents of the shipped grouping file for GCC 9.2.0.
pub const GCC_9_2_0_GROUPS: &str = include_str!("../data/gcc-9.2.0.json");

/// Compiler tag of the shipped grouping file.
pub const GCC_9_2_0_ID: &str = "gcc-9.2.0";

/// Group sizes of the shipped GCC 9.2.0 table, in group order.
pub const GCC_9_2_0_SIZES: [usize; 15] = [28, 18, 9, 4, 6, 4, 12, 23, 12, 17, 10, 18, 8, 22, 15];

/// Base optimization level every rendered command line starts from.
pub const BASE_LEVEL: &str = "-O3";

#[derive(Debug, Error)]
pub enum GroupTableError {
    #[error("failed to parse grouping file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read grouping file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("grouping table has no groups")]
    NoGroups,
    #[error("group {group} has no members")]
    EmptyGroup { group: usize },
    #[error("group at position {position} has index {found}, expected {expected}")]
    BadIndex {
        position: usize,
        found: usize,
        expected: usize,
    },
    #[error("invalid flag name {name:?} in group {group}")]
    BadFlagName { group: usize, name: String },
    #[error("flag {name:?} appears in group {first} and group {second}")]
    DuplicateFlag {
        name: String,
        first: usize,
        second: usize,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombinationError {
    #[error("combination has {found} states, table has {expected} flags")]
    LengthMismatch { expected: usize, found: usize },
    #[error("unknown flag {0:?}")]
    UnknownFlag(String),
    #[error("missing state for flag {0:?}")]
    MissingFlag(String),
    #[error("flag {0:?} set more than once")]
    RepeatedFlag(String),
    #[error("invalid bitstring character {0:?}")]
    BadBit(char),
    #[error("unexpected token {0:?}")]
    BadToken(String),
}

/// A boolean optimizer toggle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSpec {
    /// Flag identifier without the `-f` / `-fno-` prefix.
    pub name: String,
    /// Effective state under plain `-O3`.
    pub o3_default: bool,
    /// Where the group assignment came from; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl FlagSpec {
    pub fn new(name: impl Into<String>, o3_default: bool) -> Self {
        Self {
            name: name.into(),
            o3_default,
            origin: None,
        }
    }

    /// Command-line token for this flag in the given state.
    pub fn token(&self, enabled: bool) -> String {
        if enabled {
            format!("-f{}", self.name)
        } else {
            format!("-fno-{}", self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionGroup {
    /// 1-based group number.
    pub index: usize,
    pub description: String,
    pub members: Vec<FlagSpec>,
}

#[derive(Debug, Deserialize)]
struct GroupFile {
    compiler_id: String,
    groups: Vec<OptionGroup>,
}

/// A validated partition of the flag space into groups.
#[derive(Debug, Clone)]
pub struct GroupTable {
    compiler_id: String,
    groups: Vec<OptionGroup>,
    ranges: Vec<Range<usize>>,
    positions: HashMap<String, usize>,
    flat: Vec<FlagSpec>,
    digest: String,
}

impl GroupTable {
    /// Validates `groups` and builds the table. Indices must run 1..=n in order.
    pub fn new(
        compiler_id: impl Into<String>,
        groups: Vec<OptionGroup>,
    ) -> Result<Self, GroupTableError> {
        let compiler_id = compiler_id.into();
        // Programmatic tables get a digest over their canonical JSON form.
        let canonical = serde_json::json!({ "compiler_id": compiler_id, "groups": groups });
        let digest = sha256_hex(canonical.to_string().as_bytes());
        Self::build(compiler_id, groups, digest)
    }

    /// Parses a grouping document (JSON).
    pub fn from_json(source: &str) -> Result<Self, GroupTableError> {
        let file: GroupFile = serde_json::from_str(source)?;
        let digest = sha256_hex(source.as_bytes());
        Self::build(file.compiler_id, file.groups, digest)
    }

    pub fn from_path(path: &Path) -> Result<Self, GroupTableError> {
        let text = std::fs::read_to_string(path).map_err(|source| GroupTableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// The grouping table shipped for GCC 9.2.0.
    pub fn shipped() -> Self {
        Self::from_json(GCC_9_2_0_GROUPS).expect("shipped grouping file is valid")
    }

    fn build(
        compiler_id: String,
        groups: Vec<OptionGroup>,
        digest: String,
    ) -> Result<Self, GroupTableError> {
        if groups.is_empty() {
            return Err(GroupTableError::NoGroups);
        }
        let mut ranges = Vec::with_capacity(groups.len());
        let mut positions = HashMap::new();
        let mut owner: HashMap<&str, usize> = HashMap::new();
        let mut flat = Vec::new();
        for (pos, group) in groups.iter().enumerate() {
            if group.index != pos + 1 {
                return Err(GroupTableError::BadIndex {
                    position: pos,
                    found: group.index,
                    expected: pos + 1,
                });
            }
            if group.members.is_empty() {
                return Err(GroupTableError::EmptyGroup { group: group.index });
            }
            let start = flat.len();
            for member in &group.members {
                let name = member.name.as_str();
                if name.is_empty() || name.chars().any(char::is_whitespace) {
                    return Err(GroupTableError::BadFlagName {
                        group: group.index,
                        name: member.name.clone(),
                    });
                }
                if let Some(&first) = owner.get(name) {
                    return Err(GroupTableError::DuplicateFlag {
                        name: member.name.clone(),
                        first,
                        second: group.index,
                    });
                }
                owner.insert(name, group.index);
                positions.insert(member.name.clone(), flat.len());
                flat.push(member.clone());
            }
            ranges.push(start..flat.len());
        }
        Ok(Self {
            compiler_id,
            groups,
            ranges,
            positions,
            flat,
            digest,
        })
    }

    pub fn compiler_id(&self) -> &str {
        &self.compiler_id
    }

    pub fn groups(&self) -> &[OptionGroup] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Total number of flags in the space.
    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    /// Flat positions of the members of the group at `group_pos` (0-based).
    pub fn group_range(&self, group_pos: usize) -> Range<usize> {
        self.ranges[group_pos].clone()
    }

    /// 0-based group position owning the flat position `flag`.
    pub fn group_of(&self, flag: usize) -> usize {
        self.ranges.partition_point(|r| r.end <= flag)
    }

    /// Flags in group order.
    pub fn flags(&self) -> &[FlagSpec] {
        &self.flat
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.positions.get(name).copied()
    }

    /// SHA-256 of the source document (hex).
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Grouping document accepted by [`from_json`](Self::from_json).
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({ "compiler_id": self.compiler_id, "groups": self.groups });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    /// The -O3 seed combination.
    pub fn default_combination(&self) -> Combination {
        Combination {
            states: self.flat.iter().map(|f| f.o3_default).collect(),
        }
    }

    /// `-O3` followed by one explicit override per flag, in group order.
    pub fn render_flags(&self, comb: &Combination) -> Vec<String> {
        assert_eq!(comb.len(), self.len(), "combination does not match table");
        std::iter::once(BASE_LEVEL.to_string())
            .chain(
                self.flat
                    .iter()
                    .zip(comb.states.iter())
                    .map(|(flag, &on)| flag.token(on)),
            )
            .collect()
    }

    /// Inverse of [`render_flags`](Self::render_flags). Every flag must be
    /// set exactly once; a leading `-O3` is accepted and ignored.
    pub fn parse_flags<S: AsRef<str>>(
        &self,
        tokens: &[S],
    ) -> Result<Combination, CombinationError> {
        let mut states: Vec<Option<bool>> = vec![None; self.len()];
        for token in tokens {
            let token = token.as_ref();
            if token == BASE_LEVEL {
                continue;
            }
            let (name, on) = if let Some(rest) = token.strip_prefix("-fno-") {
                (rest, false)
            } else if let Some(rest) = token.strip_prefix("-f") {
                (rest, true)
            } else {
                return Err(CombinationError::BadToken(token.to_string()));
            };
            let pos = self
                .position(name)
                .ok_or_else(|| CombinationError::UnknownFlag(name.to_string()))?;
            if states[pos].replace(on).is_some() {
                return Err(CombinationError::RepeatedFlag(name.to_string()));
            }
        }
        states
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| CombinationError::MissingFlag(self.flat[i].name.clone())))
            .collect::<Result<Vec<_>, _>>()
            .map(|states| Combination { states })
    }

    /// Builds a combination from an explicit name → state mapping covering
    /// exactly the table's flags.
    pub fn combination_from_map(
        &self,
        map: &HashMap<String, bool>,
    ) -> Result<Combination, CombinationError> {
        if let Some(extra) = map.keys().find(|k| !self.positions.contains_key(*k)) {
            return Err(CombinationError::UnknownFlag(extra.clone()));
        }
        self.flat
            .iter()
            .map(|f| {
                map.get(&f.name)
                    .copied()
                    .ok_or_else(|| CombinationError::MissingFlag(f.name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|states| Combination { states })
    }

    /// Checks the partition invariant by set arithmetic: the union of the
    /// groups has as many distinct names as the sum of the group sizes.
    pub fn is_partition(&self) -> bool {
        let union: HashSet<&str> = self
            .groups
            .iter()
            .flat_map(|g| g.members.iter().map(|m| m.name.as_str()))
            .collect();
        union.len() == self.group_sizes().iter().sum::<usize>() && union.len() == self.len()
    }
}

/// On/off state for every flag of a table, stored in group order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Combination {
    states: Vec<bool>,
}

impl Combination {
    pub fn from_states(states: Vec<bool>) -> Self {
        Self { states }
    }

    /// Parses a `0`/`1` bitstring in group order.
    pub fn from_bitstring(bits: &str) -> Result<Self, CombinationError> {
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(CombinationError::BadBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|states| Self { states })
    }

    /// Bitstring form, checked against the table's size.
    pub fn from_bitstring_for(table: &GroupTable, bits: &str) -> Result<Self, CombinationError> {
        let comb = Self::from_bitstring(bits)?;
        if comb.len() != table.len() {
            return Err(CombinationError::LengthMismatch {
                expected: table.len(),
                found: comb.len(),
            });
        }
        Ok(comb)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[bool] {
        &self.states
    }

    pub fn get(&self, pos: usize) -> bool {
        self.states[pos]
    }

    pub fn set(&mut self, pos: usize, on: bool) {
        self.states[pos] = on;
    }

    pub fn flip(&mut self, pos: usize) {
        self.states[pos] = !self.states[pos];
    }

    /// Looks up a flag by name.
    pub fn state_of(&self, table: &GroupTable, name: &str) -> Option<bool> {
        table.position(name).map(|p| self.states[p])
    }

    pub fn enabled_count(&self) -> usize {
        self.states.iter().filter(|&&s| s).count()
    }

    /// Positions where `self` and `other` differ.
    pub fn diff_positions(&self, other: &Combination) -> Vec<usize> {
        self.states
            .iter()
            .zip(&other.states)
            .enumerate()
            .filter_map(|(i, (a, b))| (a != b).then_some(i))
            .collect()
    }

    pub fn to_bitstring(&self) -> String {
        self.states
            .iter()
            .map(|&s| if s { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Lowercase hex SHA-256, used for table, manifest, and landscape digests.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn to_json_round_trips() {
        let t = GroupTable::shipped();
        let back = GroupTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back.groups(), t.groups());
        assert_eq!(back.compiler_id(), t.compiler_id());
    }

    fn table_json(groups: &[(&[(&str, bool)],)]) -> String {
        let groups: Vec<_> = groups
            .iter()
            .enumerate()
            .map(|(i, (members,))| {
                serde_json::json!({
                    "index": i + 1,
                    "description": format!("g{}", i + 1),
                    "members": members.iter().map(|(n, d)| serde_json::json!({"name": n, "o3_default": d})).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({"compiler_id": "test", "groups": groups}).to_string()
    }

    #[test]
    fn shipped_table_matches_published_sizes() {
        let table = GroupTable::shipped();
        assert_eq!(table.compiler_id(), GCC_9_2_0_ID);
        assert_eq!(table.num_groups(), 15);
        assert_eq!(table.group_sizes(), GCC_9_2_0_SIZES.to_vec());
        assert_eq!(table.len(), 206);
        assert!(table.is_partition());
    }

    #[test]
    fn duplicate_flag_across_groups_is_rejected() {
        let json = table_json(&[(&[("gcse", true), ("dce", true)],), (&[("gcse", false)],)]);
        match GroupTable::from_json(&json) {
            Err(GroupTableError::DuplicateFlag {
                name,
                first,
                second,
            }) => {
                assert_eq!(name, "gcse");
                assert_eq!((first, second), (1, 2));
            }
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_table() {
        let table = GroupTable::from_json(&table_json(&[(&[("a", true)],)])).unwrap();
        assert_eq!(table.num_groups(), 1);
        assert_eq!(table.len(), 1);
    }

    #[test]
    fn empty_group_and_empty_table_are_rejected() {
        let json = r#"{"compiler_id":"x","groups":[{"index":1,"description":"d","members":[]}]}"#;
        assert!(matches!(
            GroupTable::from_json(json),
            Err(GroupTableError::EmptyGroup { group: 1 })
        ));
        let json = r#"{"compiler_id":"x","groups":[]}"#;
        assert!(matches!(
            GroupTable::from_json(json),
            Err(GroupTableError::NoGroups)
        ));
        assert!(matches!(
            GroupTable::from_json("{not json"),
            Err(GroupTableError::Parse(_))
        ));
    }

    #[test]
    fn whitespace_in_name_is_rejected() {
        let json = table_json(&[(&[("tree vrp", true)],)]);
        assert!(matches!(
            GroupTable::from_json(&json),
            Err(GroupTableError::BadFlagName { group: 1, .. })
        ));
    }

    #[test]
    fn default_combination_single_flag() {
        for d in [true, false] {
            let table = GroupTable::from_json(&table_json(&[(&[("a", d)],)])).unwrap();
            assert_eq!(table.default_combination().states(), &[d]);
        }
    }

    #[test]
    fn shipped_default_matches_file_defaults() {
        let table = GroupTable::shipped();
        let comb = table.default_combination();
        let raw: serde_json::Value = serde_json::from_str(GCC_9_2_0_GROUPS).unwrap();
        let mut expected = HashSet::new();
        for g in raw["groups"].as_array().unwrap() {
            for m in g["members"].as_array().unwrap() {
                if m["o3_default"].as_bool().unwrap() {
                    expected.insert(m["name"].as_str().unwrap().to_string());
                }
            }
        }
        let enabled: HashSet<String> = table
            .flags()
            .iter()
            .filter(|f| comb.state_of(&table, &f.name).unwrap())
            .map(|f| f.name.clone())
            .collect();
        assert_eq!(enabled, expected);
    }

    #[test]
    fn render_two_flags() {
        let table = GroupTable::from_json(&table_json(&[(&[("a", true), ("b", false)],)])).unwrap();
        let tokens = table.render_flags(&table.default_combination());
        assert_eq!(tokens, vec!["-O3", "-fa", "-fno-b"]);
    }

    #[test]
    fn render_shipped_token_count() {
        let table = GroupTable::shipped();
        let tokens = table.render_flags(&table.default_combination());
        assert_eq!(tokens.len(), 207);
        assert_eq!(tokens[0], "-O3");
    }

    #[test]
    fn parse_flags_errors() {
        let table = GroupTable::from_json(&table_json(&[(&[("a", true), ("b", false)],)])).unwrap();
        assert_eq!(
            table.parse_flags(&["-fa"]),
            Err(CombinationError::MissingFlag("b".into()))
        );
        assert_eq!(
            table.parse_flags(&["-fa", "-fno-a", "-fb"]),
            Err(CombinationError::RepeatedFlag("a".into()))
        );
        assert_eq!(
            table.parse_flags(&["-fa", "-fc", "-fb"]),
            Err(CombinationError::UnknownFlag("c".into()))
        );
        assert_eq!(
            table.parse_flags(&["-O2"]),
            Err(CombinationError::BadToken("-O2".into()))
        );
    }

    #[test]
    fn combination_from_map_requires_exact_domain() {
        let table =
            GroupTable::from_json(&table_json(&[(&[("a", true)],), (&[("b", false)],)])).unwrap();
        let mut map = HashMap::from([("a".to_string(), false)]);
        assert_eq!(
            table.combination_from_map(&map),
            Err(CombinationError::MissingFlag("b".into()))
        );
        map.insert("b".into(), true);
        assert_eq!(
            table.combination_from_map(&map).unwrap().states(),
            &[false, true]
        );
        map.insert("c".into(), true);
        assert!(matches!(
            table.combination_from_map(&map),
            Err(CombinationError::UnknownFlag(_))
        ));
    }

    #[test]
    fn group_of_maps_positions() {
        let table = GroupTable::shipped();
        for g in 0..table.num_groups() {
            for p in table.group_range(g) {
                assert_eq!(table.group_of(p), g);
            }
        }
    }

    proptest! {
        #[test]
        fn render_round_trips(bits in proptest::collection::vec(any::<bool>(), 206)) {
            let table = GroupTable::shipped();
            let comb = Combination::from_states(bits);
            let tokens = table.render_flags(&comb);
            prop_assert_eq!(table.parse_flags(&tokens).unwrap(), comb.clone());
            prop_assert_eq!(Combination::from_bitstring(&comb.to_bitstring()).unwrap(), comb);
        }

        #[test]
        fn single_flip_changes_one_token(pos in 0usize..206) {
            let table = GroupTable::shipped();
            let base = table.default_combination();
            let mut flipped = base.clone();
            flipped.flip(pos);
            let a = table.render_flags(&base);
            let b = table.render_flags(&flipped);
            let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            prop_assert_eq!(changed, 1);
        }
    }
}
