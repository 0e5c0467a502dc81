//! Concept inclusion hierarchy and per-type reference schemas.
//!
//! Every declaration hangs under exactly one parent: the concept named in
//! its `in` clause, or the implicit top of the hierarchy. Walking a type's
//! ancestor chain top-down and collecting each concept's non-empty
//! reference-class layout yields the type's reference schema — the shape
//! of the complex references that represent its instances.

use std::collections::HashMap;

use crate::ast::{Decl, ProgramAst};
use crate::diag::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Concept,
    Class,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub kind: DeclKind,
    /// Index into the program's declaration list.
    pub decl_index: usize,
    /// Parent concept name; `None` means the declaration hangs under the
    /// implicit top.
    pub parent: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConceptHierarchy {
    nodes: HashMap<String, Node>,
}

impl ConceptHierarchy {
    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    /// Ancestor names from the hierarchy top down to (excluding) `name`.
    pub fn ancestors_top_down(&self, name: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cur = self.nodes.get(name).and_then(|n| n.parent.clone());
        while let Some(p) = cur {
            cur = self.nodes.get(&p).and_then(|n| n.parent.clone());
            chain.push(p);
        }
        chain.reverse();
        chain
    }

    /// The outermost ancestor (the declaration itself when parent-less).
    pub fn topmost_ancestor<'a>(&'a self, name: &'a str) -> &'a str {
        let mut cur = name;
        while let Some(parent) = self.nodes.get(cur).and_then(|n| n.parent.as_deref()) {
            cur = parent;
        }
        cur
    }

    /// Names of concepts declared directly under the top, in declaration
    /// order of `program`. These receive the well-known singleton contexts.
    pub fn topmost_concepts<'p>(&self, program: &'p ProgramAst) -> Vec<&'p str> {
        program
            .decls
            .iter()
            .filter_map(|d| match d {
                Decl::Concept(c) if c.parent.is_none() => Some(c.name.text.as_str()),
                _ => None,
            })
            .collect()
    }
}

/// One segment of a reference schema: the owning concept and the ordered
/// field layout of its reference class.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaSegment {
    pub concept: String,
    /// `(field name, declared type name)` in declaration order.
    pub fields: Vec<(String, String)>,
}

/// Ordered reference-segment layouts for one type, high segment first.
/// Empty means instances are root-represented (plain OOP objects).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceSchema {
    pub segments: Vec<SchemaSegment>,
}

impl ReferenceSchema {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// All segment fields in order, high segment first.
    pub fn flattened(&self) -> Vec<(&str, &str)> {
        self.segments
            .iter()
            .flat_map(|s| s.fields.iter().map(|(n, t)| (n.as_str(), t.as_str())))
            .collect()
    }
}

/// Builds the inclusion hierarchy, reporting unknown parents, class
/// parents, inclusion cycles, and duplicate declaration names.
pub fn build_hierarchy(program: &ProgramAst) -> Result<ConceptHierarchy, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut nodes: HashMap<String, Node> = HashMap::new();

    for (index, decl) in program.decls.iter().enumerate() {
        let name = decl.name();
        if nodes.contains_key(&name.text) {
            diags.push(Diagnostic::new(
                name.span,
                format!("duplicate declaration name `{}`", name.text),
            ));
            continue;
        }
        let kind = match decl {
            Decl::Concept(_) => DeclKind::Concept,
            Decl::Class(_) => DeclKind::Class,
        };
        nodes.insert(
            name.text.clone(),
            Node {
                name: name.text.clone(),
                kind,
                decl_index: index,
                parent: decl.parent().map(|p| p.text.clone()),
            },
        );
    }

    for decl in &program.decls {
        let Some(parent) = decl.parent() else {
            continue;
        };
        match nodes.get(&parent.text) {
            None => diags.push(Diagnostic::new(
                parent.span,
                format!("unknown parent `{}`", parent.text),
            )),
            Some(node) if node.kind == DeclKind::Class => diags.push(Diagnostic::new(
                parent.span,
                format!("parent `{}` is a class, not a concept", parent.text),
            )),
            Some(_) => {}
        }
    }

    if diags.is_empty() {
        // Cycle detection: walk parent links from every node; revisiting a
        // node within one walk closes a cycle. Starts follow declaration
        // order so diagnostics are deterministic.
        let mut state: HashMap<&str, u8> = HashMap::new(); // 1 = in walk, 2 = done
        for decl in &program.decls {
            let start = &decl.name().text;
            if state.get(start.as_str()).copied() == Some(2) {
                continue;
            }
            let mut path: Vec<&str> = Vec::new();
            let mut cur = start.as_str();
            loop {
                match state.get(cur).copied() {
                    Some(2) => break,
                    Some(1) => {
                        let from = path.iter().position(|n| *n == cur).unwrap();
                        let mut cycle: Vec<&str> = path[from..].to_vec();
                        cycle.push(cur);
                        let span = program.decls[nodes[cur].decl_index].name().span;
                        diags.push(Diagnostic::new(
                            span,
                            format!("inclusion cycle: {}", cycle.join(" -> ")),
                        ));
                        break;
                    }
                    _ => {
                        state.insert(cur, 1);
                        path.push(cur);
                        match nodes[cur].parent.as_deref() {
                            Some(p) => cur = p,
                            None => break,
                        }
                    }
                }
            }
            for n in path {
                state.insert(n, 2);
            }
        }
    }

    if diags.is_empty() {
        Ok(ConceptHierarchy { nodes })
    } else {
        Err(diags)
    }
}

/// Computes the reference schema of `type_name`: one segment per ancestor
/// concept whose reference class is non-empty, ordered from the hierarchy
/// top downward.
pub fn reference_schema(
    type_name: &str,
    hierarchy: &ConceptHierarchy,
    program: &ProgramAst,
) -> Result<ReferenceSchema, Diagnostic> {
    if !hierarchy.contains(type_name) {
        return Err(Diagnostic::new(
            Default::default(),
            format!("unknown type `{}`", type_name),
        ));
    }
    let mut segments = Vec::new();
    for ancestor in hierarchy.ancestors_top_down(type_name) {
        let node = hierarchy.node(&ancestor).expect("ancestors are declared");
        let Decl::Concept(concept) = &program.decls[node.decl_index] else {
            continue;
        };
        if concept.reference_class.is_empty() {
            continue;
        }
        segments.push(SchemaSegment {
            concept: ancestor,
            fields: concept
                .reference_class
                .fields
                .iter()
                .map(|f| (f.name.text.clone(), f.ty.text.clone()))
                .collect(),
        });
    }
    Ok(ReferenceSchema { segments })
}
