//! Independent direct-dispatch evaluator used as a cross-check oracle.
//!
//! Deliberately trivial: every call dispatches straight to the receiver's
//! class, there are no reference segments, no `context`, and no chain
//! machinery of any kind. Programs that stray outside the plain-class
//! subset make the oracle panic, which fails the calling test loudly.

use std::collections::HashMap;

use copl::ast::{BinOp, Block, ClassBody, Decl, Expr, FieldInit, ProgramAst, Stmt};

#[derive(Debug, Clone, PartialEq)]
pub enum OValue {
    Int(i64),
    Long(i64),
    Double(f64),
    Bool(bool),
    Str(String),
    Obj(usize),
    Void,
}

pub fn render(v: &OValue) -> String {
    match v {
        OValue::Int(n) | OValue::Long(n) => n.to_string(),
        OValue::Double(d) => format!("{}", d),
        OValue::Str(s) => s.clone(),
        other => panic!("oracle cannot render {other:?}"),
    }
}

struct Object {
    class: String,
    fields: HashMap<String, OValue>,
}

pub struct Oracle<'a> {
    classes: HashMap<String, &'a ClassBody>,
    heap: Vec<Object>,
    pub output: String,
}

enum Flow {
    Normal,
    Return(OValue),
}

struct Scope {
    class: String,
    receiver: usize,
    locals: Vec<HashMap<String, (String, OValue)>>,
}

impl<'a> Oracle<'a> {
    pub fn new(program: &'a ProgramAst) -> Self {
        let mut classes = HashMap::new();
        for decl in &program.decls {
            if let Decl::Class(c) = decl {
                classes.insert(c.name.text.clone(), &c.body);
            }
        }
        Oracle {
            classes,
            heap: Vec::new(),
            output: String::new(),
        }
    }

    pub fn run_main(&mut self) {
        let main = self.instantiate("Main");
        self.call(main, "main", vec![]);
    }

    pub fn instantiate(&mut self, class: &str) -> usize {
        let body = self.classes[class];
        let mut fields = HashMap::new();
        for field in &body.fields {
            assert!(!field.is_static, "oracle does not support statics");
            let value = match &field.init {
                FieldInit::None => default_for(&field.ty.text),
                FieldInit::Expr(e) => {
                    let v = literal(e);
                    coerce(v, &field.ty.text)
                }
                FieldInit::Create => panic!("oracle does not support .create()"),
            };
            fields.insert(field.name.text.clone(), value);
        }
        self.heap.push(Object {
            class: class.to_string(),
            fields,
        });
        self.heap.len() - 1
    }

    pub fn call(&mut self, receiver: usize, method: &str, args: Vec<OValue>) -> OValue {
        let class = self.heap[receiver].class.clone();
        let decl = self.classes[class.as_str()]
            .find_method(method)
            .unwrap_or_else(|| panic!("oracle: no method {method} on {class}"));
        assert_eq!(args.len(), decl.params.len(), "oracle: arity mismatch");
        let mut locals = HashMap::new();
        for (p, v) in decl.params.iter().zip(args) {
            locals.insert(p.name.text.clone(), (p.ty.text.clone(), coerce(v, &p.ty.text)));
        }
        let mut scope = Scope {
            class: class.clone(),
            receiver,
            locals: vec![locals],
        };
        let body = &decl.body;
        match self.exec_block(body, &mut scope) {
            Flow::Return(v) => match v {
                OValue::Void => OValue::Void,
                v => coerce(v, &decl.return_ty.text),
            },
            Flow::Normal => OValue::Void,
        }
    }

    fn exec_block(&mut self, block: &Block, scope: &mut Scope) -> Flow {
        scope.locals.push(HashMap::new());
        for stmt in &block.stmts {
            match self.exec_stmt(stmt, scope) {
                Flow::Normal => {}
                flow => {
                    scope.locals.pop();
                    return flow;
                }
            }
        }
        scope.locals.pop();
        Flow::Normal
    }

    fn exec_stmt(&mut self, stmt: &Stmt, scope: &mut Scope) -> Flow {
        match stmt {
            Stmt::VarDecl { ty, name, init, .. } => {
                let value = match init {
                    Some(e) => coerce(self.eval(e, scope), &ty.text),
                    None => default_for(&ty.text),
                };
                scope
                    .locals
                    .last_mut()
                    .unwrap()
                    .insert(name.text.clone(), (ty.text.clone(), value));
                Flow::Normal
            }
            Stmt::Expr(e) => {
                self.eval(e, scope);
                Flow::Normal
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let OValue::Bool(b) = self.eval(cond, scope) else {
                    panic!("oracle: condition did not evaluate to a boolean");
                };
                if b {
                    self.exec_stmt(then_branch, scope)
                } else if let Some(e) = else_branch {
                    self.exec_stmt(e, scope)
                } else {
                    Flow::Normal
                }
            }
            Stmt::Return { value, .. } => {
                let v = value
                    .as_ref()
                    .map(|e| self.eval(e, scope))
                    .unwrap_or(OValue::Void);
                Flow::Return(v)
            }
            Stmt::Block(b) => self.exec_block(b, scope),
        }
    }

    fn eval(&mut self, expr: &Expr, scope: &mut Scope) -> OValue {
        match expr {
            Expr::IntLit { value, .. } => OValue::Int(*value),
            Expr::FloatLit { value, .. } => OValue::Double(*value),
            Expr::StrLit { value, .. } => OValue::Str(value.clone()),
            Expr::Ident(id) => self.read_name(&id.text, scope),
            Expr::Field { base, name } => {
                let OValue::Obj(h) = self.eval(base, scope) else {
                    panic!("oracle: field access on a non-object");
                };
                self.heap[h].fields[&name.text].clone()
            }
            Expr::MethodCall { recv, method, args } => {
                let OValue::Obj(h) = self.eval(recv, scope) else {
                    panic!("oracle: method call on a non-object");
                };
                let args = args.iter().map(|a| self.eval(a, scope)).collect();
                self.call(h, &method.text, args)
            }
            Expr::BareCall { name, args } => {
                let values: Vec<OValue> = args.iter().map(|a| self.eval(a, scope)).collect();
                if self.classes[scope.class.as_str()].find_method(&name.text).is_some() {
                    return self.call(scope.receiver, &name.text, values);
                }
                assert_eq!(name.text, "print", "oracle: unknown function {}", name.text);
                assert_eq!(values.len(), 1);
                self.output.push_str(&render(&values[0]));
                OValue::Void
            }
            Expr::New { ty, args, .. } => {
                assert!(args.is_empty(), "oracle: constructors take no arguments");
                OValue::Obj(self.instantiate(&ty.text))
            }
            Expr::Assign { target, value, .. } => {
                let v = self.eval(value, scope);
                self.assign(target, v, scope)
            }
            Expr::AddAssign { target, value, .. } => {
                let current = self.eval(target, scope);
                let addend = self.eval(value, scope);
                let sum = binary(BinOp::Add, current, addend);
                self.assign(target, sum, scope)
            }
            Expr::IncDec {
                target, increment, ..
            } => {
                let old = self.eval(target, scope);
                let delta = if *increment { 1 } else { -1 };
                let new = match &old {
                    OValue::Int(n) => OValue::Int(n + delta),
                    OValue::Long(n) => OValue::Long(n + delta),
                    other => panic!("oracle: ++/-- on {other:?}"),
                };
                self.assign(target, new, scope);
                old
            }
            Expr::Binary { op, lhs, rhs, .. } => {
                let l = self.eval(lhs, scope);
                let r = self.eval(rhs, scope);
                binary(*op, l, r)
            }
            Expr::Neg { operand, .. } => match self.eval(operand, scope) {
                OValue::Int(n) => OValue::Int(-n),
                OValue::Long(n) => OValue::Long(-n),
                OValue::Double(d) => OValue::Double(-d),
                other => panic!("oracle: negation of {other:?}"),
            },
            Expr::Context { .. } | Expr::RefCtor { .. } => {
                panic!("oracle does not support reference constructs")
            }
        }
    }

    fn read_name(&self, name: &str, scope: &Scope) -> OValue {
        for frame in scope.locals.iter().rev() {
            if let Some((_, v)) = frame.get(name) {
                return v.clone();
            }
        }
        self.heap[scope.receiver].fields[name].clone()
    }

    fn assign(&mut self, target: &Expr, value: OValue, scope: &mut Scope) -> OValue {
        match target {
            Expr::Ident(id) => {
                for frame in scope.locals.iter_mut().rev() {
                    if let Some((ty, slot)) = frame.get_mut(&id.text) {
                        let v = coerce(value, ty);
                        *slot = v.clone();
                        return v;
                    }
                }
                let class = &self.heap[scope.receiver].class.clone();
                let ty = self.classes[class.as_str()]
                    .find_field(&id.text)
                    .unwrap_or_else(|| panic!("oracle: unknown name {}", id.text))
                    .ty
                    .text
                    .clone();
                let v = coerce(value, &ty);
                self.heap[scope.receiver]
                    .fields
                    .insert(id.text.clone(), v.clone());
                v
            }
            Expr::Field { base, name } => {
                let OValue::Obj(h) = self.eval(base, scope) else {
                    panic!("oracle: field assignment on a non-object");
                };
                let class = self.heap[h].class.clone();
                let ty = self.classes[class.as_str()]
                    .find_field(&name.text)
                    .unwrap_or_else(|| panic!("oracle: unknown field {}", name.text))
                    .ty
                    .text
                    .clone();
                let v = coerce(value, &ty);
                self.heap[h].fields.insert(name.text.clone(), v.clone());
                v
            }
            other => panic!("oracle: bad assignment target {other:?}"),
        }
    }
}

fn literal(expr: &Expr) -> OValue {
    match expr {
        Expr::IntLit { value, .. } => OValue::Int(*value),
        Expr::FloatLit { value, .. } => OValue::Double(*value),
        Expr::StrLit { value, .. } => OValue::Str(value.clone()),
        Expr::Neg { operand, .. } => match literal(operand) {
            OValue::Int(n) => OValue::Int(-n),
            OValue::Double(d) => OValue::Double(-d),
            other => panic!("oracle: bad literal {other:?}"),
        },
        other => panic!("oracle: field initializer must be a literal, got {other:?}"),
    }
}

fn default_for(ty: &str) -> OValue {
    match ty {
        "int" => OValue::Int(0),
        "long" => OValue::Long(0),
        "double" => OValue::Double(0.0),
        "String" => OValue::Str(String::new()),
        other => panic!("oracle: no default for {other}"),
    }
}

fn coerce(value: OValue, ty: &str) -> OValue {
    match (value, ty) {
        (OValue::Int(n), "int") => OValue::Int(n),
        (OValue::Int(n), "long") => OValue::Long(n),
        (OValue::Int(n), "double") => OValue::Double(n as f64),
        (OValue::Long(n), "long") => OValue::Long(n),
        (OValue::Long(n), "double") => OValue::Double(n as f64),
        (OValue::Double(d), "double") => OValue::Double(d),
        (OValue::Str(s), "String") => OValue::Str(s),
        (OValue::Obj(h), _) => OValue::Obj(h),
        (v, ty) => panic!("oracle: cannot coerce {v:?} to {ty}"),
    }
}

fn binary(op: BinOp, l: OValue, r: OValue) -> OValue {
    if let (OValue::Str(a), OValue::Str(b)) = (&l, &r) {
        return match op {
            BinOp::Eq => OValue::Bool(a == b),
            BinOp::Ne => OValue::Bool(a != b),
            _ => panic!("oracle: bad string operator"),
        };
    }
    let uses_double = matches!(l, OValue::Double(_)) || matches!(r, OValue::Double(_));
    if uses_double {
        let a = to_f64(&l);
        let b = to_f64(&r);
        return match op {
            BinOp::Add => OValue::Double(a + b),
            BinOp::Sub => OValue::Double(a - b),
            BinOp::Eq => OValue::Bool(a == b),
            BinOp::Ne => OValue::Bool(a != b),
            BinOp::Lt => OValue::Bool(a < b),
            BinOp::Gt => OValue::Bool(a > b),
        };
    }
    let uses_long = matches!(l, OValue::Long(_)) || matches!(r, OValue::Long(_));
    let a = to_i64(&l);
    let b = to_i64(&r);
    let wrap = |n: i64| if uses_long { OValue::Long(n) } else { OValue::Int(n) };
    match op {
        BinOp::Add => wrap(a + b),
        BinOp::Sub => wrap(a - b),
        BinOp::Eq => OValue::Bool(a == b),
        BinOp::Ne => OValue::Bool(a != b),
        BinOp::Lt => OValue::Bool(a < b),
        BinOp::Gt => OValue::Bool(a > b),
    }
}

fn to_f64(v: &OValue) -> f64 {
    match v {
        OValue::Int(n) | OValue::Long(n) => *n as f64,
        OValue::Double(d) => *d,
        other => panic!("oracle: non-numeric operand {other:?}"),
    }
}

fn to_i64(v: &OValue) -> i64 {
    match v {
        OValue::Int(n) | OValue::Long(n) => *n,
        other => panic!("oracle: non-integer operand {other:?}"),
    }
}
