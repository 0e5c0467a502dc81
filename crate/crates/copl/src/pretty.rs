//! Canonical source rendering of an AST.
//!
//! The output re-parses to a structurally identical tree (spans aside),
//! which the corpus round-trip tests rely on. Comments are not part of
//! the AST and are dropped.

use crate::ast::*;

pub fn print_program(program: &ProgramAst) -> String {
    let mut p = Printer::default();
    for (i, decl) in program.decls.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.decl(decl);
    }
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn decl(&mut self, decl: &Decl) {
        match decl {
            Decl::Concept(c) => {
                let mut header = format!("concept {}", c.name.text);
                if let Some(parent) = &c.parent {
                    header.push_str(&format!(" in {}", parent.text));
                }
                self.line(&header);
                self.indent += 1;
                self.line("class {");
                self.body(&c.object_class);
                self.line("}");
                self.line("reference {");
                self.body(&c.reference_class);
                self.line("}");
                self.indent -= 1;
            }
            Decl::Class(c) => {
                let mut header = format!("class {}", c.name.text);
                if let Some(parent) = &c.parent {
                    header.push_str(&format!(" in {}", parent.text));
                }
                header.push_str(" {");
                self.line(&header);
                self.body(&c.body);
                self.line("}");
            }
        }
    }

    fn body(&mut self, body: &ClassBody) {
        self.indent += 1;
        for field in &body.fields {
            let prefix = if field.is_static { "static " } else { "" };
            let text = match &field.init {
                FieldInit::None => {
                    format!("{}{} {};", prefix, field.ty.text, field.name.text)
                }
                FieldInit::Expr(e) => format!(
                    "{}{} {} = {};",
                    prefix,
                    field.ty.text,
                    field.name.text,
                    expr(e, 0)
                ),
                FieldInit::Create => {
                    format!("{}{} {}.create();", prefix, field.ty.text, field.name.text)
                }
            };
            self.line(&text);
        }
        for method in &body.methods {
            let params: Vec<String> = method
                .params
                .iter()
                .map(|p| format!("{} {}", p.ty.text, p.name.text))
                .collect();
            self.line(&format!(
                "{} {}({}) {{",
                method.return_ty.text,
                method.name.text,
                params.join(", ")
            ));
            self.indent += 1;
            for stmt in &method.body.stmts {
                self.stmt(stmt);
            }
            self.indent -= 1;
            self.line("}");
        }
        self.indent -= 1;
    }

    fn stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::VarDecl { ty, name, init, .. } => match init {
                Some(e) => self.line(&format!("{} {} = {};", ty.text, name.text, expr(e, 0))),
                None => self.line(&format!("{} {};", ty.text, name.text)),
            },
            Stmt::Expr(e) => {
                let text = format!("{};", expr(e, 0));
                self.line(&text);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                self.line(&format!("if ({})", expr(cond, 0)));
                self.indent += 1;
                self.stmt(then_branch);
                self.indent -= 1;
                if let Some(else_branch) = else_branch {
                    self.line("else");
                    self.indent += 1;
                    self.stmt(else_branch);
                    self.indent -= 1;
                }
            }
            Stmt::Return { value, .. } => match value {
                Some(e) => self.line(&format!("return {};", expr(e, 0))),
                None => self.line("return;"),
            },
            Stmt::Block(block) => {
                self.line("{");
                self.indent += 1;
                for s in &block.stmts {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
        }
    }
}

// Precedence levels, loosest to tightest. An operand is parenthesized
// when its own level is looser than its position requires.
const PREC_ASSIGN: u8 = 1;
const PREC_EQUALITY: u8 = 2;
const PREC_RELATIONAL: u8 = 3;
const PREC_ADDITIVE: u8 = 4;
const PREC_UNARY: u8 = 5;
const PREC_POSTFIX: u8 = 6;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Assign { .. } | Expr::AddAssign { .. } => PREC_ASSIGN,
        Expr::Binary { op, .. } => match op {
            BinOp::Eq | BinOp::Ne => PREC_EQUALITY,
            BinOp::Lt | BinOp::Gt => PREC_RELATIONAL,
            BinOp::Add | BinOp::Sub => PREC_ADDITIVE,
        },
        Expr::Neg { .. } => PREC_UNARY,
        _ => PREC_POSTFIX,
    }
}

fn expr(e: &Expr, min_prec: u8) -> String {
    let text = render(e);
    if precedence(e) < min_prec {
        format!("({})", text)
    } else {
        text
    }
}

fn render(e: &Expr) -> String {
    match e {
        Expr::IntLit { value, .. } => value.to_string(),
        Expr::FloatLit { value, .. } => {
            // Keep a fractional part so the literal re-parses as a float.
            if value.fract() == 0.0 && value.is_finite() {
                format!("{:.1}", value)
            } else {
                format!("{}", value)
            }
        }
        Expr::StrLit { value, .. } => {
            let mut s = String::from("\"");
            for c in value.chars() {
                match c {
                    '\n' => s.push_str("\\n"),
                    '"' => s.push_str("\\\""),
                    '\\' => s.push_str("\\\\"),
                    other => s.push(other),
                }
            }
            s.push('"');
            s
        }
        Expr::Ident(id) => id.text.clone(),
        Expr::Context { .. } => "context".to_string(),
        Expr::Field { base, name } => {
            format!("{}.{}", expr(base, PREC_POSTFIX), name.text)
        }
        Expr::MethodCall { recv, method, args } => {
            format!(
                "{}.{}({})",
                expr(recv, PREC_POSTFIX),
                method.text,
                args_text(args)
            )
        }
        Expr::BareCall { name, args } => format!("{}({})", name.text, args_text(args)),
        Expr::New { ty, args, .. } => format!("new {}({})", ty.text, args_text(args)),
        Expr::RefCtor { ty, args, .. } => format!("{}@({})", ty.text, args_text(args)),
        Expr::Assign { target, value, .. } => {
            format!("{} = {}", expr(target, PREC_EQUALITY), expr(value, PREC_ASSIGN))
        }
        Expr::AddAssign { target, value, .. } => {
            format!("{} += {}", expr(target, PREC_EQUALITY), expr(value, PREC_ASSIGN))
        }
        Expr::IncDec {
            target, increment, ..
        } => {
            format!(
                "{}{}",
                expr(target, PREC_POSTFIX),
                if *increment { "++" } else { "--" }
            )
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let prec = precedence(e);
            // Left-associative: the right operand needs one level tighter.
            format!(
                "{} {} {}",
                expr(lhs, prec),
                op.symbol(),
                expr(rhs, prec + 1)
            )
        }
        Expr::Neg { operand, .. } => format!("-{}", expr(operand, PREC_UNARY)),
    }
}

fn args_text(args: &[Expr]) -> String {
    args.iter()
        .map(|a| expr(a, 0))
        .collect::<Vec<_>>()
        .join(", ")
}
