//! Static validation: name resolution, member layouts, typing with
//! numeric widening, `context` placement, and reference-constructor
//! shapes. Unlike the parser, checking continues past errors and reports
//! every diagnostic it finds.

use std::collections::HashMap;

use crate::ast::*;
use crate::diag::Diagnostic;
use crate::hierarchy::{ConceptHierarchy, ReferenceSchema, reference_schema};
use crate::lexer::Span;
use crate::value::Value;

/// Static type of an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Int,
    Long,
    Double,
    Bool,
    Str,
    Void,
    Root,
    Storage,
    Map,
    /// A declared concept or class used as a type. Values are complex
    /// references when the type's schema is non-empty, root handles
    /// otherwise.
    Named(String),
    /// A root handle statically known to point at an instance of the
    /// named declaration (`new T()`, `context`). Not spellable in source.
    Direct(String),
    /// Dynamically typed: the result of member access through `Root`.
    Unknown,
}

impl std::fmt::Display for Ty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Long => write!(f, "long"),
            Ty::Double => write!(f, "double"),
            Ty::Bool => write!(f, "boolean"),
            Ty::Str => write!(f, "String"),
            Ty::Void => write!(f, "void"),
            Ty::Root => write!(f, "Root"),
            Ty::Storage => write!(f, "Storage"),
            Ty::Map => write!(f, "Map"),
            Ty::Named(n) | Ty::Direct(n) => write!(f, "{}", n),
            Ty::Unknown => write!(f, "<dynamic>"),
        }
    }
}

impl Ty {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Ty::Int | Ty::Long | Ty::Double)
    }
}

/// How a field is initialized at instantiation time.
#[derive(Debug, Clone, PartialEq)]
pub enum InitValue {
    /// Type default: 0 for numerics, "" for String, nil for the rest.
    Default,
    /// A literal, already coerced to the field type.
    Literal(Value),
    /// `.create()`: a fresh Storage or Map instance.
    Create,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldInfo {
    pub name: String,
    pub ty: Ty,
    pub init: InitValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSig {
    pub params: Vec<(String, Ty)>,
    pub ret: Ty,
}

/// Member tables for one class body.
#[derive(Debug, Clone, Default)]
pub struct SideInfo {
    pub instance_fields: Vec<FieldInfo>,
    pub static_fields: Vec<FieldInfo>,
    pub methods: HashMap<String, MethodSig>,
}

impl SideInfo {
    pub fn instance_field(&self, name: &str) -> Option<&FieldInfo> {
        self.instance_fields.iter().find(|f| f.name == name)
    }

    pub fn static_field(&self, name: &str) -> Option<&FieldInfo> {
        self.static_fields.iter().find(|f| f.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct DeclInfo {
    pub name: String,
    pub is_concept: bool,
    pub decl_index: usize,
    pub object: SideInfo,
    /// Present for concepts only.
    pub reference: Option<SideInfo>,
}

/// A validated program: the AST plus everything the runtime needs —
/// the inclusion hierarchy, per-type reference schemas, and per-declaration
/// member tables. Immutable and shareable between executions.
#[derive(Debug, Clone)]
pub struct CheckedProgram {
    pub ast: ProgramAst,
    pub hierarchy: ConceptHierarchy,
    pub schemas: HashMap<String, ReferenceSchema>,
    pub decls: HashMap<String, DeclInfo>,
    /// Declaration names in source order; statics and singletons are
    /// initialized in this order.
    pub decl_order: Vec<String>,
}

pub const ENTRY_CLASS: &str = "Main";
pub const ENTRY_METHOD: &str = "main";

impl CheckedProgram {
    pub fn decl(&self, name: &str) -> &DeclInfo {
        &self.decls[name]
    }

    pub fn schema(&self, name: &str) -> &ReferenceSchema {
        &self.schemas[name]
    }

    /// The method body behind a signature. `reference_side` selects the
    /// reference class of a concept.
    pub fn method_ast(&self, decl: &str, reference_side: bool, method: &str) -> &MethodDecl {
        let index = self.decls[decl].decl_index;
        let body = if reference_side {
            self.ast.decls[index]
                .reference_class()
                .expect("reference side requires a concept")
        } else {
            self.ast.decls[index].object_class()
        };
        body.find_method(method).expect("checked method exists")
    }
}

pub fn check(
    ast: ProgramAst,
    hierarchy: ConceptHierarchy,
) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let mut checker = Checker {
        hierarchy: &hierarchy,
        decls: HashMap::new(),
        decl_order: Vec::new(),
        schemas: HashMap::new(),
        diags: Vec::new(),
    };
    checker.collect_decls(&ast);
    checker.check_bodies(&ast);
    checker.check_entry(&ast);

    let Checker {
        decls,
        decl_order,
        schemas,
        diags,
        ..
    } = checker;
    if diags.is_empty() {
        Ok(CheckedProgram {
            ast,
            hierarchy,
            schemas,
            decls,
            decl_order,
        })
    } else {
        Err(diags)
    }
}

struct Checker<'a> {
    hierarchy: &'a ConceptHierarchy,
    decls: HashMap<String, DeclInfo>,
    decl_order: Vec<String>,
    schemas: HashMap<String, ReferenceSchema>,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(span, message));
    }

    fn value_ty(&self, name: &Ident) -> Option<Ty> {
        match name.text.as_str() {
            "int" => Some(Ty::Int),
            "long" => Some(Ty::Long),
            "double" => Some(Ty::Double),
            "String" => Some(Ty::Str),
            "void" => Some(Ty::Void),
            "Root" => Some(Ty::Root),
            "Storage" => Some(Ty::Storage),
            "Map" => Some(Ty::Map),
            other if self.hierarchy.contains(other) => Some(Ty::Named(other.to_string())),
            _ => None,
        }
    }

    fn named_schema(&self, name: &str) -> &ReferenceSchema {
        static EMPTY: ReferenceSchema = ReferenceSchema { segments: Vec::new() };
        self.schemas.get(name).unwrap_or(&EMPTY)
    }

    fn is_root_represented(&self, ty: &Ty) -> bool {
        match ty {
            Ty::Direct(_) => true,
            Ty::Named(n) => self.named_schema(n).is_empty(),
            _ => false,
        }
    }

    fn assignable(&self, from: &Ty, to: &Ty) -> bool {
        if from == to || *from == Ty::Unknown || *to == Ty::Unknown {
            return true;
        }
        match (from, to) {
            (Ty::Int, Ty::Long | Ty::Double) | (Ty::Long, Ty::Double) => true,
            (Ty::Direct(t), Ty::Named(u)) => t == u && self.named_schema(t).is_empty(),
            (from, Ty::Root) => self.is_root_represented(from),
            _ => false,
        }
    }

    // ── Declaration collection ──

    fn collect_decls(&mut self, ast: &ProgramAst) {
        for decl in &ast.decls {
            let name = decl.name().text.clone();
            let schema = reference_schema(&name, self.hierarchy, ast)
                .expect("declared type has a schema");
            self.schemas.insert(name.clone(), schema);
            self.decl_order.push(name);
        }
        for (index, decl) in ast.decls.iter().enumerate() {
            let info = match decl {
                Decl::Concept(c) => DeclInfo {
                    name: c.name.text.clone(),
                    is_concept: true,
                    decl_index: index,
                    object: self.collect_side(&c.object_class, false),
                    reference: Some(self.collect_side(&c.reference_class, true)),
                },
                Decl::Class(c) => DeclInfo {
                    name: c.name.text.clone(),
                    is_concept: false,
                    decl_index: index,
                    object: self.collect_side(&c.body, false),
                    reference: None,
                },
            };
            self.decls.insert(info.name.clone(), info);
        }
    }

    fn collect_side(&mut self, body: &ClassBody, is_reference: bool) -> SideInfo {
        let mut side = SideInfo::default();
        for field in &body.fields {
            let Some(ty) = self.value_ty(&field.ty) else {
                self.error(
                    field.ty.span,
                    format!("unknown type `{}`", field.ty.text),
                );
                continue;
            };
            if ty == Ty::Void {
                self.error(field.ty.span, "void is not a value type");
                continue;
            }
            if is_reference {
                if field.is_static {
                    self.error(
                        field.name.span,
                        "reference classes cannot declare static fields",
                    );
                    continue;
                }
                if !matches!(ty, Ty::Int | Ty::Long | Ty::Double | Ty::Str) {
                    self.error(
                        field.ty.span,
                        "reference fields must be int, long, double, or String",
                    );
                    continue;
                }
            }
            let init = self.field_init(field, &ty);
            let info = FieldInfo {
                name: field.name.text.clone(),
                ty,
                init,
            };
            if field.is_static {
                side.static_fields.push(info);
            } else {
                side.instance_fields.push(info);
            }
        }
        for method in &body.methods {
            let ret = match self.value_ty(&method.return_ty) {
                Some(ty) => ty,
                None => {
                    self.error(
                        method.return_ty.span,
                        format!("unknown type `{}`", method.return_ty.text),
                    );
                    Ty::Unknown
                }
            };
            let mut params = Vec::new();
            for p in &method.params {
                let ty = match self.value_ty(&p.ty) {
                    Some(Ty::Void) => {
                        self.error(p.ty.span, "void is not a value type");
                        Ty::Unknown
                    }
                    Some(ty) => ty,
                    None => {
                        self.error(p.ty.span, format!("unknown type `{}`", p.ty.text));
                        Ty::Unknown
                    }
                };
                params.push((p.name.text.clone(), ty));
            }
            side.methods
                .insert(method.name.text.clone(), MethodSig { params, ret });
        }
        side
    }

    fn field_init(&mut self, field: &FieldDecl, ty: &Ty) -> InitValue {
        match &field.init {
            FieldInit::None => InitValue::Default,
            FieldInit::Create => {
                if matches!(ty, Ty::Storage | Ty::Map) {
                    InitValue::Create
                } else {
                    self.error(
                        field.name.span,
                        format!("`.create()` requires a Storage or Map field, not {}", ty),
                    );
                    InitValue::Default
                }
            }
            FieldInit::Expr(expr) => match literal_value(expr) {
                Some(value) => match coerce_literal(value, ty) {
                    Some(v) => InitValue::Literal(v),
                    None => {
                        self.error(
                            expr.span(),
                            format!("initializer is not assignable to a {} field", ty),
                        );
                        InitValue::Default
                    }
                },
                None => {
                    self.error(expr.span(), "field initializer must be a literal");
                    InitValue::Default
                }
            },
        }
    }

    // ── Body checking ──

    fn check_bodies(&mut self, ast: &ProgramAst) {
        for decl in &ast.decls {
            let name = decl.name().text.clone();
            if !self.decls.contains_key(&name) {
                continue;
            }
            for method in &decl.object_class().methods {
                self.check_method(&name, false, method);
            }
            if let Some(reference) = decl.reference_class() {
                for method in &reference.methods {
                    self.check_method(&name, true, method);
                }
            }
        }
    }

    fn check_method(&mut self, decl: &str, reference_side: bool, method: &MethodDecl) {
        let sig = {
            let info = &self.decls[decl];
            let side = if reference_side {
                info.reference.as_ref().expect("concept has reference side")
            } else {
                &info.object
            };
            side.methods[&method.name.text].clone()
        };
        let mut scopes = vec![HashMap::new()];
        for (name, ty) in &sig.params {
            scopes[0].insert(name.clone(), ty.clone());
        }
        let mut env = MethodEnv {
            decl: decl.to_string(),
            reference_side,
            ret: sig.ret,
            scopes,
        };
        self.check_block(&method.body, &mut env);
    }

    fn check_block(&mut self, block: &Block, env: &mut MethodEnv) {
        env.scopes.push(HashMap::new());
        for stmt in &block.stmts {
            self.check_stmt(stmt, env);
        }
        env.scopes.pop();
    }

    fn check_stmt(&mut self, stmt: &Stmt, env: &mut MethodEnv) {
        match stmt {
            Stmt::VarDecl {
                ty, name, init, ..
            } => {
                let declared = match self.value_ty(ty) {
                    Some(Ty::Void) => {
                        self.error(ty.span, "void is not a value type");
                        Ty::Unknown
                    }
                    Some(t) => t,
                    None => {
                        self.error(ty.span, format!("unknown type `{}`", ty.text));
                        Ty::Unknown
                    }
                };
                if let Some(init) = init {
                    let got = self.type_expr(init, env);
                    if !self.assignable(&got, &declared) {
                        self.error(
                            init.span(),
                            format!("cannot assign {} to a {} variable", got, declared),
                        );
                    }
                }
                let scope = env.scopes.last_mut().expect("method scope");
                if scope.insert(name.text.clone(), declared).is_some() {
                    self.error(
                        name.span,
                        format!("duplicate variable `{}`", name.text),
                    );
                }
            }
            Stmt::Expr(e) => {
                self.type_expr(e, env);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let ty = self.type_expr(cond, env);
                if ty != Ty::Bool && ty != Ty::Unknown {
                    self.error(
                        cond.span(),
                        format!("condition must be a comparison, found {}", ty),
                    );
                }
                self.check_stmt(then_branch, env);
                if let Some(else_branch) = else_branch {
                    self.check_stmt(else_branch, env);
                }
            }
            Stmt::Return { value, span } => match (value, env.ret.clone()) {
                (None, Ty::Void) => {}
                (None, ret) => {
                    self.error(*span, format!("missing return value of type {}", ret));
                }
                (Some(e), Ty::Void) => {
                    self.type_expr(e, env);
                    self.error(*span, "cannot return a value from a void method");
                }
                (Some(e), ret) => {
                    let got = self.type_expr(e, env);
                    if !self.assignable(&got, &ret) {
                        self.error(
                            e.span(),
                            format!("cannot return {} from a method returning {}", got, ret),
                        );
                    }
                }
            },
            Stmt::Block(b) => self.check_block(b, env),
        }
    }

    /// Resolves a bare name the way the runtime will: locals and
    /// parameters, then the segment's reference fields (reference side) or
    /// the receiver's instance fields and statics (object side).
    fn resolve_bare(&self, name: &str, env: &MethodEnv) -> Option<Ty> {
        for scope in env.scopes.iter().rev() {
            if let Some(ty) = scope.get(name) {
                return Some(ty.clone());
            }
        }
        let info = &self.decls[&env.decl];
        if env.reference_side {
            let side = info.reference.as_ref()?;
            side.instance_field(name).map(|f| f.ty.clone())
        } else {
            info.object
                .instance_field(name)
                .or_else(|| info.object.static_field(name))
                .map(|f| f.ty.clone())
        }
    }

    /// Member field lookup on an object of declared type `decl`:
    /// instance fields first, then statics (statics are readable through
    /// an instance).
    fn member_field_ty(&self, decl: &str, field: &str) -> Option<Ty> {
        let info = self.decls.get(decl)?;
        info.object
            .instance_field(field)
            .or_else(|| info.object.static_field(field))
            .map(|f| f.ty.clone())
    }

    fn type_expr(&mut self, expr: &Expr, env: &mut MethodEnv) -> Ty {
        match expr {
            Expr::IntLit { .. } => Ty::Int,
            Expr::FloatLit { .. } => Ty::Double,
            Expr::StrLit { .. } => Ty::Str,
            Expr::Context { span } => {
                if env.reference_side {
                    Ty::Direct(env.decl.clone())
                } else {
                    self.error(*span, "context outside reference class");
                    Ty::Unknown
                }
            }
            Expr::Ident(id) => match self.resolve_bare(&id.text, env) {
                Some(ty) => ty,
                None => {
                    if self.decls.contains_key(&id.text) {
                        self.error(
                            id.span,
                            format!("type name `{}` cannot be used as a value", id.text),
                        );
                    } else {
                        self.error(id.span, format!("unknown name `{}`", id.text));
                    }
                    Ty::Unknown
                }
            },
            Expr::Field { base, name } => self.type_field_access(base, name, env),
            Expr::MethodCall { recv, method, args } => {
                self.type_method_call(recv, method, args, env)
            }
            Expr::BareCall { name, args } => self.type_bare_call(name, args, env),
            Expr::New { ty, args, span } => {
                match self.value_ty(ty) {
                    Some(Ty::Named(n)) => {
                        if !args.is_empty() {
                            self.error(
                                *span,
                                format!(
                                    "type `{}` has no constructor taking {} arguments",
                                    n,
                                    args.len()
                                ),
                            );
                            for a in args {
                                self.type_expr(a, env);
                            }
                        }
                        Ty::Direct(n)
                    }
                    Some(other) => {
                        self.error(
                            *span,
                            format!("`new` requires a declared type, not {}", other),
                        );
                        Ty::Unknown
                    }
                    None => {
                        self.error(*span, format!("unknown type `{}`", ty.text));
                        Ty::Unknown
                    }
                }
            }
            Expr::RefCtor { ty, args, span } => {
                for (i, a) in args.iter().enumerate() {
                    let got = self.type_expr(a, env);
                    if let Some(Ty::Named(n)) = self.value_ty(ty) {
                        let schema = self.named_schema(&n).clone();
                        if let Some((_, field_ty_name)) = schema.flattened().get(i) {
                            let want = self
                                .value_ty(&Ident::new(*field_ty_name, Span::default()))
                                .unwrap_or(Ty::Unknown);
                            if !self.assignable(&got, &want) {
                                self.error(
                                    a.span(),
                                    format!(
                                        "segment value {} is not assignable to {} `{}`",
                                        got,
                                        want,
                                        schema.flattened()[i].0
                                    ),
                                );
                            }
                        }
                    }
                }
                match self.value_ty(ty) {
                    Some(Ty::Named(n)) => {
                        let schema = self.named_schema(&n);
                        let expected = schema.flattened().len();
                        if schema.is_empty() {
                            self.error(
                                *span,
                                format!(
                                    "type `{}` is root-represented and has no reference form",
                                    n
                                ),
                            );
                            Ty::Unknown
                        } else {
                            if args.len() != expected {
                                self.error(
                                    *span,
                                    format!(
                                        "reference constructor expects {} values, got {}",
                                        expected,
                                        args.len()
                                    ),
                                );
                            }
                            Ty::Named(n)
                        }
                    }
                    Some(other) => {
                        self.error(
                            *span,
                            format!("`@` requires a declared type, not {}", other),
                        );
                        Ty::Unknown
                    }
                    None => {
                        self.error(*span, format!("unknown type `{}`", ty.text));
                        Ty::Unknown
                    }
                }
            }
            Expr::Assign {
                target,
                value,
                span,
            } => {
                let target_ty = self.type_assign_target(target, env);
                let got = self.type_expr(value, env);
                if !self.assignable(&got, &target_ty) {
                    self.error(
                        *span,
                        format!("cannot assign {} to a {} target", got, target_ty),
                    );
                }
                target_ty
            }
            Expr::AddAssign {
                target,
                value,
                span,
            } => {
                let target_ty = self.type_assign_target(target, env);
                let got = self.type_expr(value, env);
                if target_ty != Ty::Unknown && !target_ty.is_numeric() {
                    self.error(*span, format!("`+=` requires a numeric target, found {}", target_ty));
                } else if !self.assignable(&got, &target_ty) {
                    self.error(
                        *span,
                        format!("cannot add {} to a {} target", got, target_ty),
                    );
                }
                target_ty
            }
            Expr::IncDec { target, span, .. } => {
                let target_ty = self.type_assign_target(target, env);
                if !matches!(target_ty, Ty::Int | Ty::Long | Ty::Unknown) {
                    self.error(
                        *span,
                        format!("`++`/`--` require an int or long target, found {}", target_ty),
                    );
                }
                target_ty
            }
            Expr::Binary { op, lhs, rhs, span } => {
                let lt = self.type_expr(lhs, env);
                let rt = self.type_expr(rhs, env);
                self.type_binary(*op, lt, rt, *span)
            }
            Expr::Neg { operand, span } => {
                let ty = self.type_expr(operand, env);
                if ty.is_numeric() || ty == Ty::Unknown {
                    ty
                } else {
                    self.error(*span, format!("unary `-` requires a numeric operand, found {}", ty));
                    Ty::Unknown
                }
            }
        }
    }

    fn type_binary(&mut self, op: BinOp, lt: Ty, rt: Ty, span: Span) -> Ty {
        let numeric = |t: &Ty| t.is_numeric() || *t == Ty::Unknown;
        match op {
            BinOp::Add | BinOp::Sub => {
                if numeric(&lt) && numeric(&rt) {
                    widen_join(&lt, &rt)
                } else {
                    self.error(
                        span,
                        format!("operator `{}` requires numeric operands, found {} and {}", op.symbol(), lt, rt),
                    );
                    Ty::Unknown
                }
            }
            BinOp::Lt | BinOp::Gt => {
                if numeric(&lt) && numeric(&rt) {
                    Ty::Bool
                } else {
                    self.error(
                        span,
                        format!("operator `{}` requires numeric operands, found {} and {}", op.symbol(), lt, rt),
                    );
                    Ty::Bool
                }
            }
            BinOp::Eq | BinOp::Ne => {
                let ok = (numeric(&lt) && numeric(&rt))
                    || (lt == Ty::Str && rt == Ty::Str)
                    || lt == Ty::Unknown
                    || rt == Ty::Unknown;
                if !ok {
                    self.error(
                        span,
                        format!("operator `{}` requires numeric or String operands, found {} and {}", op.symbol(), lt, rt),
                    );
                }
                Ty::Bool
            }
        }
    }

    /// Types an assignment target, rejecting non-writable positions.
    fn type_assign_target(&mut self, target: &Expr, env: &mut MethodEnv) -> Ty {
        match target {
            Expr::Ident(id) => match self.resolve_bare(&id.text, env) {
                Some(ty) => ty,
                None => {
                    self.error(id.span, format!("unknown name `{}`", id.text));
                    Ty::Unknown
                }
            },
            Expr::Field { .. } => self.type_expr(target, env),
            other => {
                self.error(other.span(), "invalid assignment target");
                Ty::Unknown
            }
        }
    }

    fn type_field_access(&mut self, base: &Expr, name: &Ident, env: &mut MethodEnv) -> Ty {
        // `Decl.field` reads a static, unless the declaration name is
        // shadowed by a value binding.
        if let Expr::Ident(base_id) = base {
            if self.resolve_bare(&base_id.text, env).is_none()
                && self.decls.contains_key(&base_id.text)
            {
                let info = &self.decls[&base_id.text];
                return match info.object.static_field(&name.text) {
                    Some(f) => f.ty.clone(),
                    None => {
                        self.error(
                            name.span,
                            format!(
                                "no static field `{}` on `{}`",
                                name.text, base_id.text
                            ),
                        );
                        Ty::Unknown
                    }
                };
            }
        }
        let base_ty = self.type_expr(base, env);
        match base_ty {
            Ty::Direct(t) => self.object_field(&t, name),
            Ty::Named(t) => {
                if self.named_schema(&t).is_empty() {
                    self.object_field(&t, name)
                } else {
                    self.error(
                        name.span,
                        format!(
                            "cannot access field `{}` through a reference of type `{}`",
                            name.text, t
                        ),
                    );
                    Ty::Unknown
                }
            }
            Ty::Root | Ty::Unknown => Ty::Unknown,
            other => {
                self.error(
                    name.span,
                    format!("type {} has no field `{}`", other, name.text),
                );
                Ty::Unknown
            }
        }
    }

    fn object_field(&mut self, decl: &str, name: &Ident) -> Ty {
        match self.member_field_ty(decl, &name.text) {
            Some(ty) => ty,
            None => {
                self.error(
                    name.span,
                    format!("unknown field `{}` on `{}`", name.text, decl),
                );
                Ty::Unknown
            }
        }
    }

    fn check_call_args(
        &mut self,
        what: &str,
        sig: &MethodSig,
        args: &[Expr],
        span: Span,
        env: &mut MethodEnv,
    ) {
        let arg_tys: Vec<Ty> = args.iter().map(|a| self.type_expr(a, env)).collect();
        if arg_tys.len() != sig.params.len() {
            self.error(
                span,
                format!(
                    "{} expects {} arguments, got {}",
                    what,
                    sig.params.len(),
                    arg_tys.len()
                ),
            );
            return;
        }
        for (got, (pname, want)) in arg_tys.iter().zip(&sig.params) {
            if !self.assignable(got, want) {
                self.error(
                    span,
                    format!(
                        "{}: argument `{}` expects {}, got {}",
                        what, pname, want, got
                    ),
                );
            }
        }
    }

    fn type_method_call(
        &mut self,
        recv: &Expr,
        method: &Ident,
        args: &[Expr],
        env: &mut MethodEnv,
    ) -> Ty {
        // `Decl.method(…)` has no meaning: statics are fields only.
        if let Expr::Ident(base_id) = recv {
            if self.resolve_bare(&base_id.text, env).is_none()
                && self.decls.contains_key(&base_id.text)
            {
                self.error(
                    method.span,
                    format!(
                        "`{}` is a type name; only static fields can be accessed on it",
                        base_id.text
                    ),
                );
                for a in args {
                    self.type_expr(a, env);
                }
                return Ty::Unknown;
            }
        }
        let recv_ty = self.type_expr(recv, env);
        let span = method.span;

        // `continue` on a root reference is the chain primitive; on
        // anything else (other than dynamic receivers) it is rejected.
        if method.text == "continue" {
            match recv_ty {
                Ty::Root | Ty::Unknown => {
                    if !args.is_empty() {
                        self.error(span, "`continue` takes no arguments");
                    }
                    return Ty::Void;
                }
                other => {
                    self.error(
                        span,
                        format!("`continue` receiver must be Root, found {}", other),
                    );
                    for a in args {
                        self.type_expr(a, env);
                    }
                    return Ty::Void;
                }
            }
        }

        match recv_ty {
            Ty::Storage => self.type_storage_call(method, args, env),
            Ty::Map => self.type_map_call(method, args, env),
            Ty::Root | Ty::Unknown => {
                for a in args {
                    self.type_expr(a, env);
                }
                Ty::Unknown
            }
            Ty::Direct(t) => self.type_object_call(&t, method, args, env),
            Ty::Named(t) => {
                if self.named_schema(&t).is_empty() {
                    return self.type_object_call(&t, method, args, env);
                }
                let info = &self.decls[&t];
                // Dual dispatch: the receiver type's own reference class
                // wins when it defines the method.
                if let Some(sig) = info
                    .reference
                    .as_ref()
                    .and_then(|r| r.methods.get(&method.text))
                    .cloned()
                {
                    let what = format!("method `{}`", method.text);
                    self.check_call_args(&what, &sig, args, span, env);
                    return sig.ret;
                }
                self.type_object_call(&t, method, args, env)
            }
            other => {
                self.error(
                    span,
                    format!("cannot call a method on a {} value", other),
                );
                for a in args {
                    self.type_expr(a, env);
                }
                Ty::Unknown
            }
        }
    }

    fn type_object_call(
        &mut self,
        decl: &str,
        method: &Ident,
        args: &[Expr],
        env: &mut MethodEnv,
    ) -> Ty {
        let Some(sig) = self
            .decls
            .get(decl)
            .and_then(|i| i.object.methods.get(&method.text))
            .cloned()
        else {
            self.error(
                method.span,
                format!("unknown method `{}` on `{}`", method.text, decl),
            );
            for a in args {
                self.type_expr(a, env);
            }
            return Ty::Unknown;
        };
        let what = format!("method `{}`", method.text);
        self.check_call_args(&what, &sig, args, method.span, env);
        sig.ret
    }

    fn type_storage_call(&mut self, method: &Ident, args: &[Expr], env: &mut MethodEnv) -> Ty {
        let sig = match method.text.as_str() {
            "load" => MethodSig {
                params: vec![("key".into(), Ty::Long)],
                ret: Ty::Root,
            },
            "store" => MethodSig {
                params: vec![("key".into(), Ty::Long), ("object".into(), Ty::Root)],
                ret: Ty::Void,
            },
            "open" | "close" => MethodSig {
                params: vec![],
                ret: Ty::Void,
            },
            other => {
                self.error(
                    method.span,
                    format!("unknown Storage method `{}`", other),
                );
                for a in args {
                    self.type_expr(a, env);
                }
                return Ty::Unknown;
            }
        };
        let what = format!("Storage.{}", method.text);
        self.check_call_args(&what, &sig, args, method.span, env);
        sig.ret
    }

    fn type_map_call(&mut self, method: &Ident, args: &[Expr], env: &mut MethodEnv) -> Ty {
        let sig = match method.text.as_str() {
            "get" => MethodSig {
                params: vec![("key".into(), Ty::Str)],
                ret: Ty::Root,
            },
            "put" => MethodSig {
                params: vec![("key".into(), Ty::Str), ("object".into(), Ty::Root)],
                ret: Ty::Void,
            },
            other => {
                self.error(method.span, format!("unknown Map method `{}`", other));
                for a in args {
                    self.type_expr(a, env);
                }
                return Ty::Unknown;
            }
        };
        let what = format!("Map.{}", method.text);
        self.check_call_args(&what, &sig, args, method.span, env);
        sig.ret
    }

    fn type_bare_call(&mut self, name: &Ident, args: &[Expr], env: &mut MethodEnv) -> Ty {
        let own_sig = {
            let info = &self.decls[&env.decl];
            let side = if env.reference_side {
                info.reference.as_ref().expect("concept reference side")
            } else {
                &info.object
            };
            side.methods.get(&name.text).cloned()
        };
        if let Some(sig) = own_sig {
            let what = format!("method `{}`", name.text);
            self.check_call_args(&what, &sig, args, name.span, env);
            return sig.ret;
        }
        if name.text == "print" {
            if args.len() != 1 {
                self.error(name.span, format!("print expects 1 argument, got {}", args.len()));
                for a in args {
                    self.type_expr(a, env);
                }
                return Ty::Void;
            }
            let ty = self.type_expr(&args[0], env);
            if !matches!(ty, Ty::Str | Ty::Int | Ty::Long | Ty::Double | Ty::Unknown) {
                self.error(
                    args[0].span(),
                    format!("print expects a string or numeric argument, found {}", ty),
                );
            }
            return Ty::Void;
        }
        self.error(name.span, format!("unknown function `{}`", name.text));
        for a in args {
            self.type_expr(a, env);
        }
        Ty::Unknown
    }

    fn check_entry(&mut self, ast: &ProgramAst) {
        let ok = self.decls.get(ENTRY_CLASS).is_some_and(|info| {
            !info.is_concept
                && self.hierarchy.node(ENTRY_CLASS).is_some_and(|n| n.parent.is_none())
                && info
                    .object
                    .methods
                    .get(ENTRY_METHOD)
                    .is_some_and(|sig| sig.params.is_empty() && sig.ret == Ty::Void)
        });
        if !ok {
            let span = ast
                .decls
                .iter()
                .find(|d| d.name().text == ENTRY_CLASS)
                .map(|d| d.name().span)
                .unwrap_or_default();
            self.error(
                span,
                "no entry point: expected a parent-less `class Main` with `void main()`",
            );
        }
    }
}

struct MethodEnv {
    decl: String,
    reference_side: bool,
    ret: Ty,
    scopes: Vec<HashMap<String, Ty>>,
}

fn widen_join(a: &Ty, b: &Ty) -> Ty {
    if *a == Ty::Unknown || *b == Ty::Unknown {
        return Ty::Unknown;
    }
    match (a, b) {
        (Ty::Double, _) | (_, Ty::Double) => Ty::Double,
        (Ty::Long, _) | (_, Ty::Long) => Ty::Long,
        _ => Ty::Int,
    }
}

/// Extracts the value of a (possibly negated) literal expression.
fn literal_value(expr: &Expr) -> Option<Value> {
    match expr {
        Expr::IntLit { value, .. } => Some(Value::Int(*value)),
        Expr::FloatLit { value, .. } => Some(Value::Double(*value)),
        Expr::StrLit { value, .. } => Some(Value::Str(value.clone())),
        Expr::Neg { operand, .. } => match literal_value(operand)? {
            Value::Int(n) => Some(Value::Int(-n)),
            Value::Double(d) => Some(Value::Double(-d)),
            _ => None,
        },
        _ => None,
    }
}

/// Coerces a literal to a field/segment type, applying numeric widening.
pub fn coerce_literal(value: Value, ty: &Ty) -> Option<Value> {
    match (value, ty) {
        (Value::Int(n), Ty::Int) => Some(Value::Int(n)),
        (Value::Int(n), Ty::Long) => Some(Value::Long(n)),
        (Value::Int(n), Ty::Double) => Some(Value::Double(n as f64)),
        (Value::Long(n), Ty::Long) => Some(Value::Long(n)),
        (Value::Long(n), Ty::Double) => Some(Value::Double(n as f64)),
        (Value::Double(d), Ty::Double) => Some(Value::Double(d)),
        (Value::Str(s), Ty::Str) => Some(Value::Str(s)),
        _ => None,
    }
}

/// The default value of a declared type: numeric zero, empty string, or a
/// nil that faults on use.
pub fn default_value(ty: &Ty) -> Value {
    match ty {
        Ty::Int => Value::Int(0),
        Ty::Long => Value::Long(0),
        Ty::Double => Value::Double(0.0),
        Ty::Str => Value::Str(String::new()),
        _ => Value::Nil,
    }
}
