//! Abstract syntax tree for COP-lite programs.
//!
//! A program is a flat list of declarations. A `concept` pairs an object
//! class with a reference class; a `class` is a concept without the
//! reference half. Both may name a parent declaration via `in`.

use crate::lexer::Span;

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramAst {
    pub decls: Vec<Decl>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Concept(ConceptDecl),
    Class(ClassDecl),
}

impl Decl {
    pub fn name(&self) -> &Ident {
        match self {
            Decl::Concept(c) => &c.name,
            Decl::Class(c) => &c.name,
        }
    }

    pub fn parent(&self) -> Option<&Ident> {
        match self {
            Decl::Concept(c) => c.parent.as_ref(),
            Decl::Class(c) => c.parent.as_ref(),
        }
    }

    /// The object class: the concept's `class { … }` section, or the whole
    /// body for a plain class.
    pub fn object_class(&self) -> &ClassBody {
        match self {
            Decl::Concept(c) => &c.object_class,
            Decl::Class(c) => &c.body,
        }
    }

    pub fn reference_class(&self) -> Option<&ClassBody> {
        match self {
            Decl::Concept(c) => Some(&c.reference_class),
            Decl::Class(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDecl {
    pub name: Ident,
    pub parent: Option<Ident>,
    /// Always present; an omitted `class { … }` section parses as empty.
    pub object_class: ClassBody,
    /// Always present; an omitted `reference { … }` section parses as empty.
    pub reference_class: ClassBody,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: Ident,
    pub parent: Option<Ident>,
    pub body: ClassBody,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassBody {
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
}

impl ClassBody {
    /// A body with neither fields nor methods contributes no reference
    /// segment and no members.
    pub fn is_empty(&self) -> bool {
        self.fields.is_empty() && self.methods.is_empty()
    }

    pub fn find_method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name.text == name)
    }

    pub fn find_field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name.text == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub is_static: bool,
    pub ty: Ident,
    pub name: Ident,
    pub init: FieldInit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldInit {
    /// No initializer; the field gets its type's default value.
    None,
    /// `= <literal>`
    Expr(Expr),
    /// `.create()` — a fresh built-in instance per object (or per program
    /// for statics).
    Create,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub return_ty: Ident,
    pub name: Ident,
    pub params: Vec<Param>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub ty: Ident,
    pub name: Ident,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub text: String,
    pub span: Span,
}

impl Ident {
    pub fn new(text: impl Into<String>, span: Span) -> Self {
        Ident {
            text: text.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    /// `Type name (= expr)? ;`
    VarDecl {
        ty: Ident,
        name: Ident,
        init: Option<Expr>,
        span: Span,
    },
    Expr(Expr),
    If {
        cond: Expr,
        then_branch: Box<Stmt>,
        else_branch: Option<Box<Stmt>>,
        span: Span,
    },
    Return {
        value: Option<Expr>,
        span: Span,
    },
    Block(Block),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Ne,
    Lt,
    Gt,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit {
        value: i64,
        span: Span,
    },
    FloatLit {
        value: f64,
        span: Span,
    },
    StrLit {
        value: String,
        span: Span,
    },
    Ident(Ident),
    /// The `context` keyword: the object the current reference segment is
    /// interpreted in.
    Context {
        span: Span,
    },
    Field {
        base: Box<Expr>,
        name: Ident,
    },
    /// `recv.method(args)`
    MethodCall {
        recv: Box<Expr>,
        method: Ident,
        args: Vec<Expr>,
    },
    /// `f(args)` — a built-in (`print`) or a method of the enclosing body.
    BareCall {
        name: Ident,
        args: Vec<Expr>,
    },
    /// `new Type(args)`
    New {
        ty: Ident,
        args: Vec<Expr>,
        span: Span,
    },
    /// `Type@(v1, …, vk)` — constructs a complex reference; values fill the
    /// flattened reference schema of `Type`, high segment first.
    RefCtor {
        ty: Ident,
        args: Vec<Expr>,
        span: Span,
    },
    Assign {
        target: Box<Expr>,
        value: Box<Expr>,
        span: Span,
    },
    /// `target += value`
    AddAssign {
        target: Box<Expr>,
        value: Box<Expr>,
        span: Span,
    },
    /// Postfix `++` / `--`; evaluates to the old value.
    IncDec {
        target: Box<Expr>,
        increment: bool,
        span: Span,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        span: Span,
    },
    /// Unary minus.
    Neg {
        operand: Box<Expr>,
        span: Span,
    },
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::IntLit { span, .. }
            | Expr::FloatLit { span, .. }
            | Expr::StrLit { span, .. }
            | Expr::Context { span }
            | Expr::New { span, .. }
            | Expr::RefCtor { span, .. }
            | Expr::Assign { span, .. }
            | Expr::AddAssign { span, .. }
            | Expr::IncDec { span, .. }
            | Expr::Binary { span, .. }
            | Expr::Neg { span, .. } => *span,
            Expr::Ident(id) => id.span,
            Expr::Field { base, .. } => base.span(),
            Expr::MethodCall { recv, .. } => recv.span(),
            Expr::BareCall { name, .. } => name.span,
        }
    }
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::VarDecl { span, .. } | Stmt::If { span, .. } | Stmt::Return { span, .. } => {
                *span
            }
            Stmt::Expr(e) => e.span(),
            Stmt::Block(b) => b.span,
        }
    }
}

impl ProgramAst {
    /// Resets every source position to the default span. Two ASTs that
    /// differ only in formatting compare equal after this, which is what
    /// the pretty-print round-trip checks rely on.
    pub fn clear_spans(&mut self) {
        for decl in &mut self.decls {
            match decl {
                Decl::Concept(c) => {
                    c.span = Span::default();
                    clear_ident(&mut c.name);
                    if let Some(p) = &mut c.parent {
                        clear_ident(p);
                    }
                    clear_body(&mut c.object_class);
                    clear_body(&mut c.reference_class);
                }
                Decl::Class(c) => {
                    c.span = Span::default();
                    clear_ident(&mut c.name);
                    if let Some(p) = &mut c.parent {
                        clear_ident(p);
                    }
                    clear_body(&mut c.body);
                }
            }
        }
    }
}

fn clear_ident(id: &mut Ident) {
    id.span = Span::default();
}

fn clear_body(body: &mut ClassBody) {
    for f in &mut body.fields {
        clear_ident(&mut f.ty);
        clear_ident(&mut f.name);
        if let FieldInit::Expr(e) = &mut f.init {
            clear_expr(e);
        }
    }
    for m in &mut body.methods {
        clear_ident(&mut m.return_ty);
        clear_ident(&mut m.name);
        for p in &mut m.params {
            clear_ident(&mut p.ty);
            clear_ident(&mut p.name);
        }
        clear_block(&mut m.body);
    }
}

fn clear_block(block: &mut Block) {
    block.span = Span::default();
    for stmt in &mut block.stmts {
        clear_stmt(stmt);
    }
}

fn clear_stmt(stmt: &mut Stmt) {
    match stmt {
        Stmt::VarDecl {
            ty,
            name,
            init,
            span,
        } => {
            *span = Span::default();
            clear_ident(ty);
            clear_ident(name);
            if let Some(e) = init {
                clear_expr(e);
            }
        }
        Stmt::Expr(e) => clear_expr(e),
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            span,
        } => {
            *span = Span::default();
            clear_expr(cond);
            clear_stmt(then_branch);
            if let Some(e) = else_branch {
                clear_stmt(e);
            }
        }
        Stmt::Return { value, span } => {
            *span = Span::default();
            if let Some(e) = value {
                clear_expr(e);
            }
        }
        Stmt::Block(b) => clear_block(b),
    }
}

fn clear_expr(expr: &mut Expr) {
    match expr {
        Expr::IntLit { span, .. }
        | Expr::FloatLit { span, .. }
        | Expr::StrLit { span, .. }
        | Expr::Context { span } => *span = Span::default(),
        Expr::Ident(id) => clear_ident(id),
        Expr::Field { base, name } => {
            clear_expr(base);
            clear_ident(name);
        }
        Expr::MethodCall { recv, method, args } => {
            clear_expr(recv);
            clear_ident(method);
            args.iter_mut().for_each(clear_expr);
        }
        Expr::BareCall { name, args } => {
            clear_ident(name);
            args.iter_mut().for_each(clear_expr);
        }
        Expr::New { ty, args, span } | Expr::RefCtor { ty, args, span } => {
            *span = Span::default();
            clear_ident(ty);
            args.iter_mut().for_each(clear_expr);
        }
        Expr::Assign {
            target,
            value,
            span,
        }
        | Expr::AddAssign {
            target,
            value,
            span,
        } => {
            *span = Span::default();
            clear_expr(target);
            clear_expr(value);
        }
        Expr::IncDec { target, span, .. } => {
            *span = Span::default();
            clear_expr(target);
        }
        Expr::Binary { lhs, rhs, span, .. } => {
            *span = Span::default();
            clear_expr(lhs);
            clear_expr(rhs);
        }
        Expr::Neg { operand, span } => {
            *span = Span::default();
            clear_expr(operand);
        }
    }
}
