//! Path-compressed binary trie over 64-bit keys formed as `src ‖ dst`.
//!
//! Every node stores a left-aligned prefix and its bit length. Children of a
//! node extend its prefix by at least one bit, so a root-to-leaf walk visits
//! at most 65 nodes (lengths 0 through 64). Nodes without a value always
//! have two children, except the root.

use crate::eid::Eid;

pub const KEY_BITS: u8 = 64;
/// Upper bound on nodes touched by any lookup.
pub const MAX_VISITS: usize = KEY_BITS as usize + 1;

const ROOT: u32 = 0;

/// Authorization stored per (source, destination) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllowRecord {
    /// Milliseconds; `None` never expires.
    pub expiry: Option<u64>,
}

fn mask(len: u8) -> u64 {
    if len == 0 {
        0
    } else {
        !0u64 << (KEY_BITS - len)
    }
}

fn bit(key: u64, index: u8) -> usize {
    ((key >> (KEY_BITS - 1 - index)) & 1) as usize
}

fn common_len(a: u64, b: u64, limit: u8) -> u8 {
    ((a ^ b).leading_zeros() as u8).min(limit)
}

pub fn pair_key(src: Eid, dst: Eid) -> u64 {
    (u64::from(src.get()) << 32) | u64::from(dst.get())
}

#[derive(Clone, Debug)]
struct Node<V> {
    key: u64,
    len: u8,
    value: Option<V>,
    children: [Option<u32>; 2],
}

impl<V> Node<V> {
    fn new(key: u64, len: u8, value: Option<V>) -> Self {
        Node {
            key: key & mask(len),
            len,
            value,
            children: [None, None],
        }
    }

    fn child_count(&self) -> usize {
        self.children.iter().flatten().count()
    }
}

/// Result of a lookup, with the number of nodes examined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lookup<T> {
    pub hit: Option<T>,
    pub visits: usize,
}

#[derive(Clone, Debug)]
pub struct PolicyTrie<V = AllowRecord> {
    nodes: Vec<Node<V>>,
    free: Vec<u32>,
    len: usize,
}

impl<V> Default for PolicyTrie<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> PolicyTrie<V> {
    pub fn new() -> Self {
        PolicyTrie {
            nodes: vec![Node::new(0, 0, None)],
            free: Vec::new(),
            len: 0,
        }
    }

    /// Number of stored prefixes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Allocated nodes, including the root and valueless branch nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    fn alloc(&mut self, node: Node<V>) -> u32 {
        match self.free.pop() {
            Some(i) => {
                self.nodes[i as usize] = node;
                i
            }
            None => {
                self.nodes.push(node);
                (self.nodes.len() - 1) as u32
            }
        }
    }

    fn release(&mut self, i: u32) {
        let n = &mut self.nodes[i as usize];
        n.value = None;
        n.children = [None, None];
        self.free.push(i);
    }

    fn node(&self, i: u32) -> &Node<V> {
        &self.nodes[i as usize]
    }

    pub fn insert(&mut self, src: Eid, dst: Eid, value: V) -> Option<V> {
        self.insert_prefix(pair_key(src, dst), KEY_BITS, value)
    }

    /// Store `value` under the first `len` bits of `key`.
    pub fn insert_prefix(&mut self, key: u64, len: u8, value: V) -> Option<V> {
        assert!(len <= KEY_BITS, "prefix length {len} exceeds key width");
        let key = key & mask(len);
        let mut cur = ROOT;
        loop {
            let node = self.node(cur);
            if node.len == len {
                let old = self.nodes[cur as usize].value.replace(value);
                if old.is_none() {
                    self.len += 1;
                }
                return old;
            }
            let dir = bit(key, node.len);
            let Some(c) = node.children[dir] else {
                let leaf = self.alloc(Node::new(key, len, Some(value)));
                self.nodes[cur as usize].children[dir] = Some(leaf);
                self.len += 1;
                return None;
            };
            let child = self.node(c);
            let shared = common_len(child.key, key, child.len.min(len));
            if shared == child.len {
                cur = c;
                continue;
            }
            let child_key = child.key;
            let split = if shared == len {
                // The new prefix sits between `cur` and the child.
                let mut n = Node::new(key, len, Some(value));
                n.children[bit(child_key, len)] = Some(c);
                self.alloc(n)
            } else {
                let leaf = self.alloc(Node::new(key, len, Some(value)));
                let mut branch = Node::new(key, shared, None);
                branch.children[bit(child_key, shared)] = Some(c);
                branch.children[bit(key, shared)] = Some(leaf);
                self.alloc(branch)
            };
            self.nodes[cur as usize].children[dir] = Some(split);
            self.len += 1;
            return None;
        }
    }

    pub fn remove(&mut self, src: Eid, dst: Eid) -> Option<V> {
        self.remove_prefix(pair_key(src, dst), KEY_BITS)
    }

    pub fn remove_prefix(&mut self, key: u64, len: u8) -> Option<V> {
        let key = key & mask(len);
        // (node, direction taken from its parent)
        let mut path: Vec<(u32, usize)> = vec![(ROOT, 0)];
        let mut cur = ROOT;
        while self.node(cur).len < len {
            let dir = bit(key, self.node(cur).len);
            let c = self.node(cur).children[dir]?;
            let child = self.node(c);
            if child.len > len || common_len(child.key, key, child.len) < child.len {
                return None;
            }
            path.push((c, dir));
            cur = c;
        }
        let old = self.nodes[cur as usize].value.take()?;
        self.len -= 1;
        self.compact(&path);
        Some(old)
    }

    /// Restore the no-single-child invariant along `path` after a removal at
    /// its last node.
    fn compact(&mut self, path: &[(u32, usize)]) {
        let mut depth = path.len() - 1;
        while depth > 0 {
            let (i, dir) = path[depth];
            let parent = path[depth - 1].0;
            let node = self.node(i);
            if node.value.is_some() {
                return;
            }
            match node.child_count() {
                0 => {
                    self.nodes[parent as usize].children[dir] = None;
                    self.release(i);
                }
                1 => {
                    let only = node.children.iter().flatten().copied().next();
                    self.nodes[parent as usize].children[dir] = only;
                    self.release(i);
                    return;
                }
                _ => return,
            }
            depth -= 1;
        }
    }

    /// Exact match on the full 64-bit pair.
    pub fn get(&self, src: Eid, dst: Eid) -> Lookup<&V> {
        let key = pair_key(src, dst);
        let mut cur = ROOT;
        let mut visits = 1;
        loop {
            let node = self.node(cur);
            if node.len == KEY_BITS {
                let hit = if node.key == key { node.value.as_ref() } else { None };
                return Lookup { hit, visits };
            }
            let Some(c) = node.children[bit(key, node.len)] else {
                return Lookup { hit: None, visits };
            };
            let child = self.node(c);
            visits += 1;
            if common_len(child.key, key, child.len) < child.len {
                return Lookup { hit: None, visits };
            }
            cur = c;
        }
    }

    /// Longest stored prefix covering `src ‖ dst`. Entries for this use are
    /// inserted with [`PolicyTrie::insert_dst_prefix`].
    pub fn lookup_lpm(&self, src: Eid, dst: Eid) -> Lookup<(u8, &V)> {
        let key = pair_key(src, dst);
        let mut cur = ROOT;
        let mut visits = 1;
        let mut best = None;
        loop {
            let node = self.node(cur);
            if let Some(v) = &node.value {
                best = Some((node.len, v));
            }
            if node.len == KEY_BITS {
                return Lookup { hit: best, visits };
            }
            let Some(c) = node.children[bit(key, node.len)] else {
                return Lookup { hit: best, visits };
            };
            let child = self.node(c);
            visits += 1;
            if common_len(child.key, key, child.len) < child.len {
                return Lookup { hit: best, visits };
            }
            cur = c;
        }
    }

    /// Store `value` for `src` towards every destination in `dst/dst_len`.
    pub fn insert_dst_prefix(&mut self, src: Eid, dst: Eid, dst_len: u8, value: V) -> Option<V> {
        assert!(dst_len <= 32, "destination prefix longer than 32 bits");
        self.insert_prefix(pair_key(src, dst), 32 + dst_len, value)
    }

    pub fn remove_dst_prefix(&mut self, src: Eid, dst: Eid, dst_len: u8) -> Option<V> {
        assert!(dst_len <= 32, "destination prefix longer than 32 bits");
        self.remove_prefix(pair_key(src, dst), 32 + dst_len)
    }

    /// All stored `(key, prefix length, value)` triples in key order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u8, &V)> + '_ {
        let mut stack = vec![ROOT];
        std::iter::from_fn(move || {
            while let Some(i) = stack.pop() {
                let n = self.node(i);
                for c in n.children.iter().rev().flatten() {
                    stack.push(*c);
                }
                if let Some(v) = &n.value {
                    return Some((n.key, n.len, v));
                }
            }
            None
        })
    }

    /// Full pairs only, decoded back to endpoint ids.
    pub fn pairs(&self) -> impl Iterator<Item = (Eid, Eid, &V)> + '_ {
        self.iter().filter(|(_, len, _)| *len == KEY_BITS).filter_map(|(k, _, v)| {
            let src = Eid::new((k >> 32) as u32).ok()?;
            let dst = Eid::new(k as u32).ok()?;
            Some((src, dst, v))
        })
    }

    /// Check structural invariants; returns a description of the first
    /// violation found.
    pub fn check_structure(&self) -> Result<(), String> {
        let mut stack = vec![ROOT];
        let mut values = 0;
        let mut reachable = 0;
        while let Some(i) = stack.pop() {
            reachable += 1;
            let n = self.node(i);
            if n.key & !mask(n.len) != 0 {
                return Err(format!("node {i} has bits beyond its length"));
            }
            if n.value.is_some() {
                values += 1;
            } else if i != ROOT && n.child_count() < 2 {
                return Err(format!("valueless node {i} has {} children", n.child_count()));
            }
            for (dir, c) in n.children.iter().enumerate() {
                let Some(c) = *c else { continue };
                let child = self.node(c);
                if child.len <= n.len {
                    return Err(format!("child {c} does not extend parent {i}"));
                }
                if common_len(child.key, n.key, n.len) < n.len || bit(child.key, n.len) != dir {
                    return Err(format!("child {c} is not under parent {i} on side {dir}"));
                }
                stack.push(c);
            }
        }
        if values != self.len {
            return Err(format!("{values} values reachable, {} counted", self.len));
        }
        if reachable != self.node_count() {
            return Err(format!("{reachable} nodes reachable, {} allocated", self.node_count()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eid(s: &str) -> Eid {
        s.parse().unwrap()
    }

    fn rec() -> AllowRecord {
        AllowRecord { expiry: None }
    }

    #[test]
    fn exact_hit_and_miss() {
        let mut t = PolicyTrie::new();
        t.insert(eid("10.0.0.2"), eid("10.0.1.7"), rec());
        assert!(t.get(eid("10.0.0.2"), eid("10.0.1.7")).hit.is_some());
        assert!(t.get(eid("10.0.0.2"), eid("10.0.1.8")).hit.is_none());
        t.check_structure().unwrap();
    }

    #[test]
    fn empty_trie_misses() {
        let t: PolicyTrie = PolicyTrie::new();
        let l = t.get(eid("1.2.3.4"), eid("5.6.7.8"));
        assert_eq!(l, Lookup { hit: None, visits: 1 });
    }

    #[test]
    fn remove_collapses_branches() {
        let mut t = PolicyTrie::new();
        let a = (eid("10.0.0.1"), eid("10.0.0.2"));
        let b = (eid("10.0.0.1"), eid("10.0.0.3"));
        t.insert(a.0, a.1, rec());
        t.insert(b.0, b.1, rec());
        assert_eq!(t.node_count(), 4);
        assert!(t.remove(a.0, a.1).is_some());
        assert!(t.remove(a.0, a.1).is_none());
        t.check_structure().unwrap();
        assert_eq!(t.node_count(), 2);
        assert!(t.get(b.0, b.1).hit.is_some());
        assert!(t.remove(b.0, b.1).is_some());
        assert_eq!(t.node_count(), 1);
        assert!(t.is_empty());
    }

    #[test]
    fn insert_replaces_value() {
        let mut t = PolicyTrie::new();
        let (s, d) = (eid("1.1.1.1"), eid("2.2.2.2"));
        assert_eq!(t.insert(s, d, AllowRecord { expiry: Some(5) }), None);
        assert_eq!(t.insert(s, d, rec()), Some(AllowRecord { expiry: Some(5) }));
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn longest_prefix_wins() {
        let mut t = PolicyTrie::new();
        let src = eid("10.0.0.2");
        t.insert_dst_prefix(src, eid("10.0.1.0"), 24, "/24");
        t.insert_dst_prefix(src, eid("10.0.0.0"), 16, "/16");
        assert_eq!(t.lookup_lpm(src, eid("10.0.1.7")).hit, Some((56, &"/24")));
        assert_eq!(t.lookup_lpm(src, eid("10.0.9.9")).hit, Some((48, &"/16")));
        assert_eq!(t.lookup_lpm(src, eid("11.0.0.1")).hit, None);
        t.insert_dst_prefix(src, eid("10.0.1.7"), 32, "/32");
        assert_eq!(t.lookup_lpm(src, eid("10.0.1.7")).hit, Some((64, &"/32")));
        t.check_structure().unwrap();
        t.remove_dst_prefix(src, eid("10.0.1.0"), 24);
        assert_eq!(t.lookup_lpm(src, eid("10.0.1.8")).hit, Some((48, &"/16")));
        t.check_structure().unwrap();
    }
}
