//! Typed feature structures with coindexation.
//!
//! A [`Fs`] is an immutable rooted DAG. Nodes carry a type drawn from a
//! [`TypeHierarchy`], an attribute map, and an optional integer tag. Two
//! attribute paths that lead to the same node are *reentrant*; in the textual
//! syntax the shared node is written with a `[n]` prefix at its first
//! occurrence and as a bare `[n]` everywhere else.
//!
//! Tags are entry-local: within one structure every tag names exactly one
//! node, and [`unify`] identifies nodes that carry the same tag in both
//! operands.
//!
//! Textual syntax:
//!
//! ```text
//! value   := tag? type? avm?          (at least one part present)
//! tag     := '[' digits ']'
//! avm     := '[' (feature (','? feature)*)? ']'
//! feature := name ':' value
//! ```
//!
//! For example the semantic zone of a purchase verb reads
//! `BUY [agent: [11] HUMAN, theme: [21] OBJECT]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

/// Name of the most general type.
pub const TOP: &str = "*top*";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TfsError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type hierarchy: {0}")]
    Hierarchy(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("structure is cyclic")]
    Cyclic,
}

/// Why a unification did not produce a result.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnifyError {
    /// The two types have no unique common subtype.
    #[error("type clash between `{left}` and `{right}`")]
    Clash { left: String, right: String },
    /// Merging reentrancies would produce a cycle.
    #[error("unification would create a cycle")]
    Cycle,
    #[error(transparent)]
    IllTyped(#[from] TfsError),
}

impl UnifyError {
    /// True for ordinary unification failure (as opposed to malformed input).
    pub fn is_failure(&self) -> bool {
        !matches!(self, UnifyError::IllTyped(_))
    }
}

/// A multiple-inheritance type hierarchy with a single top type.
#[derive(Debug, Clone)]
pub struct TypeHierarchy {
    parents: BTreeMap<String, Vec<String>>,
    ancestors: HashMap<String, BTreeSet<String>>,
}

impl TypeHierarchy {
    /// Builds a hierarchy from `(type, parents)` pairs. Types without parents
    /// hang directly under [`TOP`].
    pub fn new<I, S, P>(decls: I) -> Result<Self, TfsError>
    where
        I: IntoIterator<Item = (S, P)>,
        S: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        parents.insert(TOP.to_string(), Vec::new());
        for (name, ps) in decls {
            let name = name.into();
            if name == TOP {
                return Err(TfsError::Hierarchy("top type cannot be redeclared".into()));
            }
            let mut ps: Vec<String> = ps.into_iter().map(Into::into).collect();
            if ps.is_empty() {
                ps.push(TOP.to_string());
            }
            if parents.insert(name.clone(), ps).is_some() {
                return Err(TfsError::Hierarchy(format!("duplicate type `{name}`")));
            }
        }
        for (name, ps) in &parents {
            for p in ps {
                if !parents.contains_key(p) {
                    return Err(TfsError::Hierarchy(format!(
                        "type `{name}` has unknown parent `{p}`"
                    )));
                }
            }
        }

        let mut ancestors = HashMap::new();
        for name in parents.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![name.clone()];
            while let Some(t) = stack.pop() {
                if !seen.insert(t.clone()) {
                    continue;
                }
                for p in &parents[&t] {
                    if p == name {
                        return Err(TfsError::Hierarchy(format!("cycle through `{name}`")));
                    }
                    stack.push(p.clone());
                }
            }
            ancestors.insert(name.clone(), seen);
        }
        Ok(TypeHierarchy { parents, ancestors })
    }

    pub fn contains(&self, ty: &str) -> bool {
        self.parents.contains_key(ty)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    /// Reflexive subtype test: `sub` is `sup` or below it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        sup == TOP || self.ancestors.get(sub).is_some_and(|a| a.contains(sup))
    }

    /// Greatest lower bound of two types. Two or more incomparable maximal
    /// common subtypes count as a clash.
    pub fn meet(&self, a: &str, b: &str) -> Result<String, UnifyError> {
        for t in [a, b] {
            if !self.contains(t) {
                return Err(TfsError::UnknownType(t.to_string()).into());
            }
        }
        if self.is_subtype(a, b) {
            return Ok(a.to_string());
        }
        if self.is_subtype(b, a) {
            return Ok(b.to_string());
        }
        let common: Vec<&String> = self
            .ancestors
            .iter()
            .filter(|(_, anc)| anc.contains(a) && anc.contains(b))
            .map(|(t, _)| t)
            .collect();
        let maximal: Vec<&&String> = common
            .iter()
            .filter(|t| !common.iter().any(|u| u != *t && self.is_subtype(t, u)))
            .collect();
        match maximal.as_slice() {
            [only] => Ok((**only).clone()),
            _ => Err(UnifyError::Clash { left: a.to_string(), right: b.to_string() }),
        }
    }

    /// Fails with the first type of `fs` missing from the hierarchy.
    pub fn check(&self, fs: &Fs) -> Result<(), TfsError> {
        match fs.nodes.iter().find(|n| !self.contains(&n.ty)) {
            Some(n) => Err(TfsError::UnknownType(n.ty.clone())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    ty: String,
    tag: Option<u32>,
    attrs: BTreeMap<String, usize>,
}

/// An immutable typed feature structure.
///
/// Node storage is kept canonical (depth-first preorder from the root,
/// attributes in name order), so derived equality is graph isomorphism
/// including tag labels. Use [`Fs::equiv`] to compare up to tag renaming.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fs {
    nodes: Vec<Node>,
}

/// Borrowed view of one node of a [`Fs`].
#[derive(Clone, Copy)]
pub struct NodeRef<'a> {
    fs: &'a Fs,
    id: usize,
}

impl<'a> NodeRef<'a> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn ty(&self) -> &'a str {
        &self.fs.nodes[self.id].ty
    }

    pub fn tag(&self) -> Option<u32> {
        self.fs.nodes[self.id].tag
    }

    pub fn get(&self, attr: &str) -> Option<NodeRef<'a>> {
        self.fs.nodes[self.id].attrs.get(attr).map(|&id| NodeRef { fs: self.fs, id })
    }

    pub fn attrs(&self) -> impl Iterator<Item = (&'a str, NodeRef<'a>)> + 'a {
        let fs = self.fs;
        fs.nodes[self.id].attrs.iter().map(move |(k, &id)| (k.as_str(), NodeRef { fs, id }))
    }

    pub fn is_atomic(&self) -> bool {
        self.fs.nodes[self.id].attrs.is_empty()
    }
}

impl fmt::Debug for NodeRef<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fs.subgraph(self.id))
    }
}

impl Fs {
    /// Untyped, attribute-less structure; subsumes everything.
    pub fn top() -> Fs {
        Fs::atom(TOP)
    }

    pub fn atom(ty: impl Into<String>) -> Fs {
        Fs { nodes: vec![Node { ty: ty.into(), tag: None, attrs: BTreeMap::new() }] }
    }

    pub fn root(&self) -> NodeRef<'_> {
        NodeRef { fs: self, id: 0 }
    }

    pub fn node(&self, id: usize) -> NodeRef<'_> {
        NodeRef { fs: self, id }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Follows an attribute path from the root.
    pub fn at(&self, path: &[&str]) -> Option<NodeRef<'_>> {
        let mut cur = self.root();
        for p in path {
            cur = cur.get(p)?;
        }
        Some(cur)
    }

    pub fn tags(&self) -> BTreeSet<u32> {
        self.nodes.iter().filter_map(|n| n.tag).collect()
    }

    pub fn max_tag(&self) -> Option<u32> {
        self.nodes.iter().filter_map(|n| n.tag).max()
    }

    /// Node ids reachable from `from`, including it.
    pub fn reachable(&self, from: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.nodes[n].attrs.values().copied());
            }
        }
        seen
    }

    /// Copy of the substructure rooted at `node`.
    pub fn subgraph(&self, node: usize) -> Fs {
        let mut b = FsBuilder::default();
        let id = b.import(self, node);
        b.finish(id).expect("a substructure of a DAG is acyclic")
    }

    /// Equality up to consistent renaming of tags.
    pub fn equiv(&self, other: &Fs) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.ty == b.ty && a.attrs == b.attrs)
    }

    /// The same structure with tags stripped from unshared nodes and the
    /// remaining tags renumbered from 1 in preorder.
    pub fn normalized_tags(&self) -> Fs {
        let mut indeg = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            for &c in n.attrs.values() {
                indeg[c] += 1;
            }
        }
        let mut next = 0;
        let mut out = self.clone();
        for (i, n) in out.nodes.iter_mut().enumerate() {
            n.tag = if indeg[i] > 1 {
                next += 1;
                Some(next)
            } else {
                None
            };
        }
        out
    }

    /// Parses one structure in the textual syntax.
    pub fn parse(text: &str) -> Result<Fs, TfsError> {
        let mut p = Parser::new();
        let root = p.value(text, 0)?;
        p.finish(root)
    }

    /// Parses several named zones that share one tag namespace into a single
    /// structure whose root has one attribute per zone.
    pub fn parse_zones(zones: &[(&str, &str)]) -> Result<Fs, TfsError> {
        let mut p = Parser::new();
        let mut attrs = BTreeMap::new();
        for (i, (name, text)) in zones.iter().enumerate() {
            let id = p.value(text, i)?;
            attrs.insert(name.to_string(), id);
        }
        let root = p.b.push(Node { ty: TOP.into(), tag: None, attrs });
        p.finish(root)
    }

    /// Renders the named top-level zones with a shared tag namespace. Zones
    /// are rendered in `render_order` (bodies of shared nodes appear at
    /// their first rendered occurrence); the result follows the input order.
    pub fn render_zones(&self, zones: &[&str], render_order: &[&str]) -> Vec<String> {
        let mut w = Writer::new(self);
        let mut out: BTreeMap<&str, String> = BTreeMap::new();
        for z in render_order {
            let s = match self.root().get(z) {
                Some(n) => {
                    let mut s = String::new();
                    w.write(&mut s, n.id);
                    s
                }
                None => "[]".to_string(),
            };
            out.insert(z, s);
        }
        zones.iter().map(|z| out.remove(z).unwrap_or_else(|| "[]".into())).collect()
    }
}

impl fmt::Display for Fs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        Writer::new(self).write(&mut s, 0);
        f.write_str(&s)
    }
}

impl std::str::FromStr for Fs {
    type Err = TfsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fs::parse(s)
    }
}

/// Mutable arena for assembling structures. [`FsBuilder::finish`] yields a
/// canonical [`Fs`].
#[derive(Debug, Default, Clone)]
pub struct FsBuilder {
    nodes: Vec<Node>,
}

impl FsBuilder {
    fn push(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    pub fn node(&mut self, ty: impl Into<String>) -> usize {
        self.push(Node { ty: ty.into(), tag: None, attrs: BTreeMap::new() })
    }

    pub fn tagged(&mut self, ty: impl Into<String>, tag: u32) -> usize {
        self.push(Node { ty: ty.into(), tag: Some(tag), attrs: BTreeMap::new() })
    }

    pub fn set(&mut self, node: usize, attr: impl Into<String>, value: usize) {
        self.nodes[node].attrs.insert(attr.into(), value);
    }

    pub fn remove(&mut self, node: usize, attr: &str) -> Option<usize> {
        self.nodes[node].attrs.remove(attr)
    }

    pub fn get(&self, node: usize, attr: &str) -> Option<usize> {
        self.nodes[node].attrs.get(attr).copied()
    }

    pub fn ty(&self, node: usize) -> &str {
        &self.nodes[node].ty
    }

    pub fn set_ty(&mut self, node: usize, ty: impl Into<String>) {
        self.nodes[node].ty = ty.into();
    }

    pub fn tag(&self, node: usize) -> Option<u32> {
        self.nodes[node].tag
    }

    pub fn set_tag(&mut self, node: usize, tag: Option<u32>) {
        self.nodes[node].tag = tag;
    }

    pub fn max_tag(&self) -> Option<u32> {
        self.nodes.iter().filter_map(|n| n.tag).max()
    }

    /// Copies the substructure of `fs` rooted at `from`, preserving sharing
    /// and tags. Returns the id of the copied root.
    pub fn import(&mut self, fs: &Fs, from: usize) -> usize {
        let mut map = HashMap::new();
        self.import_rec(fs, from, &mut map)
    }

    fn import_rec(&mut self, fs: &Fs, id: usize, map: &mut HashMap<usize, usize>) -> usize {
        if let Some(&n) = map.get(&id) {
            return n;
        }
        let src = &fs.nodes[id];
        let new = self.push(Node { ty: src.ty.clone(), tag: src.tag, attrs: BTreeMap::new() });
        map.insert(id, new);
        for (k, &c) in &src.attrs {
            let cid = self.import_rec(fs, c, map);
            self.nodes[new].attrs.insert(k.clone(), cid);
        }
        new
    }

    /// Canonicalizes the structure reachable from `root`. Shared nodes that
    /// lack a tag receive fresh ones above the current maximum.
    pub fn finish(self, root: usize) -> Result<Fs, TfsError> {
        canonicalize(self.nodes, root)
    }
}

fn canonicalize(nodes: Vec<Node>, root: usize) -> Result<Fs, TfsError> {
    if has_cycle(&nodes, root) {
        return Err(TfsError::Cyclic);
    }

    let mut order = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if index.contains_key(&n) {
            continue;
        }
        index.insert(n, order.len());
        order.push(n);
        for &c in nodes[n].attrs.values().rev() {
            if !index.contains_key(&c) {
                stack.push(c);
            }
        }
    }

    let mut indeg = vec![0usize; nodes.len()];
    for &n in &order {
        for &c in nodes[n].attrs.values() {
            indeg[c] += 1;
        }
    }
    let mut next_tag = order.iter().filter_map(|&n| nodes[n].tag).max().unwrap_or(0);
    let mut seen_tags = BTreeSet::new();
    let mut out = Vec::with_capacity(order.len());
    for &n in &order {
        let src = &nodes[n];
        let mut tag = src.tag;
        if let Some(t) = tag {
            if !seen_tags.insert(t) {
                return Err(TfsError::Parse { pos: 0, msg: format!("tag [{t}] names two nodes") });
            }
        } else if indeg[n] > 1 {
            next_tag += 1;
            tag = Some(next_tag);
            seen_tags.insert(next_tag);
        }
        out.push(Node {
            ty: src.ty.clone(),
            tag,
            attrs: src.attrs.iter().map(|(k, c)| (k.clone(), index[c])).collect(),
        });
    }
    Ok(Fs { nodes: out })
}

fn has_cycle(nodes: &[Node], root: usize) -> bool {
    fn visit(nodes: &[Node], n: usize, state: &mut [u8]) -> bool {
        match state[n] {
            1 => return true,
            2 => return false,
            _ => {}
        }
        state[n] = 1;
        for &c in nodes[n].attrs.values() {
            if visit(nodes, c, state) {
                return true;
            }
        }
        state[n] = 2;
        false
    }
    let mut state = vec![0u8; nodes.len()];
    visit(nodes, root, &mut state)
}

// ---------------------------------------------------------------------------
// Unification and subsumption

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Most general structure subsumed by both `a` and `b`.
///
/// Nodes carrying the same tag in `a` and `b` are identified. Inputs are
/// left untouched.
pub fn unify(a: &Fs, b: &Fs, h: &TypeHierarchy) -> Result<Fs, UnifyError> {
    h.check(a)?;
    h.check(b)?;
    let offset = a.nodes.len();
    let mut nodes: Vec<Node> = a.nodes.clone();
    nodes.extend(b.nodes.iter().map(|n| Node {
        ty: n.ty.clone(),
        tag: n.tag,
        attrs: n.attrs.iter().map(|(k, &c)| (k.clone(), c + offset)).collect(),
    }));
    let mut uf = UnionFind { parent: (0..nodes.len()).collect() };

    let mut pending = vec![(0, offset)];
    let tag_pos: HashMap<u32, usize> =
        a.nodes.iter().enumerate().filter_map(|(i, n)| n.tag.map(|t| (t, i))).collect();
    for (i, n) in b.nodes.iter().enumerate() {
        if let Some(&j) = n.tag.and_then(|t| tag_pos.get(&t)) {
            pending.push((j, i + offset));
        }
    }

    while let Some((x, y)) = pending.pop() {
        let (rx, ry) = (uf.find(x), uf.find(y));
        if rx == ry {
            continue;
        }
        let ty = h.meet(&nodes[rx].ty, &nodes[ry].ty)?;
        uf.parent[ry] = rx;
        let moved = std::mem::take(&mut nodes[ry].attrs);
        for (k, c) in moved {
            match nodes[rx].attrs.get(&k) {
                Some(&d) => pending.push((d, c)),
                None => {
                    nodes[rx].attrs.insert(k, c);
                }
            }
        }
        nodes[rx].tag = match (nodes[rx].tag, nodes[ry].tag) {
            (Some(s), Some(t)) => Some(s.min(t)),
            (s, t) => s.or(t),
        };
        nodes[rx].ty = ty;
    }

    // Rewrite every edge onto class representatives.
    let reps: Vec<usize> = (0..nodes.len()).map(|i| uf.find(i)).collect();
    for n in nodes.iter_mut() {
        for c in n.attrs.values_mut() {
            *c = reps[*c];
        }
    }
    let root = reps[0];
    canonicalize(nodes, root).map_err(|e| match e {
        TfsError::Cyclic => UnifyError::Cycle,
        other => UnifyError::IllTyped(other),
    })
}

/// True iff every type, path and reentrancy constraint of `general` holds in
/// `specific`. Tags present in both must land on the same node.
pub fn subsumes(general: &Fs, specific: &Fs, h: &TypeHierarchy) -> Result<bool, TfsError> {
    h.check(general)?;
    h.check(specific)?;
    let spec_tags: HashMap<u32, usize> = specific
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| n.tag.map(|t| (t, i)))
        .collect();
    let mut map: Vec<Option<usize>> = vec![None; general.nodes.len()];
    let mut stack = vec![(0usize, 0usize)];
    while let Some((g, s)) = stack.pop() {
        match map[g] {
            Some(prev) if prev == s => continue,
            Some(_) => return Ok(false),
            None => map[g] = Some(s),
        }
        let gn = &general.nodes[g];
        let sn = &specific.nodes[s];
        if !h.is_subtype(&sn.ty, &gn.ty) {
            return Ok(false);
        }
        if let Some(&t) = gn.tag.as_ref().and_then(|t| spec_tags.get(t)) {
            if t != s {
                return Ok(false);
            }
        }
        for (k, &gc) in &gn.attrs {
            match sn.attrs.get(k) {
                Some(&sc) => stack.push((gc, sc)),
                None => return Ok(false),
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Text syntax

struct Parser {
    b: FsBuilder,
    tags: HashMap<u32, (usize, bool)>,
}

struct Cursor<'s> {
    s: &'s [u8],
    pos: usize,
    zone: usize,
}

impl Cursor<'_> {
    fn err(&self, msg: impl Into<String>) -> TfsError {
        let msg = msg.into();
        let msg = if self.zone > 0 { format!("zone {}: {msg}", self.zone + 1) } else { msg };
        TfsError::Parse { pos: self.pos, msg }
    }

    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn ident(&mut self) -> Option<String> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let ok = c.is_ascii_alphanumeric() || matches!(c, b'_' | b'-' | b'*' | b'.');
            if !ok {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| String::from_utf8_lossy(&self.s[start..self.pos]).into_owned())
    }

    /// Tries to read `[digits]` at the cursor.
    fn tag(&mut self) -> Option<u32> {
        if self.peek() != Some(b'[') {
            return None;
        }
        let mut i = self.pos + 1;
        while i < self.s.len() && self.s[i].is_ascii_whitespace() {
            i += 1;
        }
        let start = i;
        while i < self.s.len() && self.s[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return None;
        }
        let digits = std::str::from_utf8(&self.s[start..i]).ok()?;
        while i < self.s.len() && self.s[i].is_ascii_whitespace() {
            i += 1;
        }
        if self.s.get(i) != Some(&b']') {
            return None;
        }
        let n = digits.parse().ok()?;
        self.pos = i + 1;
        Some(n)
    }
}

impl Parser {
    fn new() -> Self {
        Parser { b: FsBuilder::default(), tags: HashMap::new() }
    }

    fn value(&mut self, text: &str, zone: usize) -> Result<usize, TfsError> {
        let mut c = Cursor { s: text.as_bytes(), pos: 0, zone };
        let id = self.parse_value(&mut c)?;
        c.ws();
        if c.pos != c.s.len() {
            return Err(c.err("trailing input"));
        }
        Ok(id)
    }

    fn parse_value(&mut self, c: &mut Cursor) -> Result<usize, TfsError> {
        c.ws();
        let tag = c.tag();
        c.ws();
        let ty = c.ident();
        c.ws();
        let avm = if c.peek() == Some(b'[') { Some(self.parse_avm(c)?) } else { None };
        if tag.is_none() && ty.is_none() && avm.is_none() {
            return Err(c.err("expected a value"));
        }
        let has_body = ty.is_some() || avm.is_some();
        let node = match tag {
            Some(t) => match self.tags.get(&t).copied() {
                Some((id, defined)) => {
                    if has_body && defined {
                        return Err(c.err(format!("tag [{t}] has two bodies")));
                    }
                    if has_body {
                        self.tags.insert(t, (id, true));
                    }
                    id
                }
                None => {
                    let id = self.b.tagged(TOP, t);
                    self.tags.insert(t, (id, has_body));
                    id
                }
            },
            None => self.b.node(TOP),
        };
        if has_body {
            if let Some(ty) = ty {
                self.b.set_ty(node, ty);
            }
            for (k, v) in avm.unwrap_or_default() {
                self.b.set(node, k, v);
            }
        }
        Ok(node)
    }

    fn parse_avm(&mut self, c: &mut Cursor) -> Result<Vec<(String, usize)>, TfsError> {
        c.pos += 1; // '['
        let mut feats: Vec<(String, usize)> = Vec::new();
        loop {
            c.ws();
            match c.peek() {
                Some(b']') => {
                    c.pos += 1;
                    return Ok(feats);
                }
                Some(b',') if !feats.is_empty() => {
                    c.pos += 1;
                    continue;
                }
                None => return Err(c.err("unterminated attribute block")),
                _ => {}
            }
            let name = c.ident().ok_or_else(|| c.err("expected attribute name"))?;
            c.ws();
            if c.peek() != Some(b':') {
                return Err(c.err(format!("expected ':' after `{name}`")));
            }
            c.pos += 1;
            let v = self.parse_value(c)?;
            if feats.iter().any(|(k, _)| *k == name) {
                return Err(c.err(format!("duplicate attribute `{name}`")));
            }
            feats.push((name, v));
        }
    }

    fn finish(self, root: usize) -> Result<Fs, TfsError> {
        self.b.finish(root)
    }
}

struct Writer<'a> {
    fs: &'a Fs,
    shared: Vec<bool>,
    written: Vec<bool>,
}

impl<'a> Writer<'a> {
    fn new(fs: &'a Fs) -> Self {
        let mut indeg = vec![0usize; fs.nodes.len()];
        for n in &fs.nodes {
            for &c in n.attrs.values() {
                indeg[c] += 1;
            }
        }
        let shared = indeg.iter().map(|&d| d > 1).collect();
        Writer { fs, shared, written: vec![false; fs.nodes.len()] }
    }

    fn write(&mut self, out: &mut String, id: usize) {
        let n = &self.fs.nodes[id];
        let tag = n.tag;
        if let Some(t) = tag {
            out.push_str(&format!("[{t}]"));
            if self.written[id] && self.shared[id] {
                return;
            }
        }
        self.written[id] = true;
        let has_ty = n.ty != TOP;
        if has_ty {
            if tag.is_some() {
                out.push(' ');
            }
            out.push_str(&n.ty);
        }
        if !n.attrs.is_empty() {
            if has_ty || tag.is_some() {
                out.push(' ');
            }
            out.push('[');
            for (i, (k, &c)) in n.attrs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(k);
                out.push_str(": ");
                self.write(out, c);
            }
            out.push(']');
        } else if !has_ty && tag.is_none() {
            out.push_str("[]");
        }
    }
}
