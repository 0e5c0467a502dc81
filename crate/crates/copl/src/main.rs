//! `copl` — the COP-lite command-line interpreter.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or I/O error,
//! 3 parse or check error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use copl::check::check;
use copl::diag::Diagnostic;
use copl::hierarchy::build_hierarchy;
use copl::interp::{run, RunOptions};
use copl::lexer::{tokenize, TokenKind};
use copl::parser::parse;
use copl::pretty::print_program;

#[derive(Parser)]
#[command(name = "copl", about = "Interpreter for the COP-lite language", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, check, and execute a program.
    Run {
        /// Source file (UTF-8 text, typically `.cop`).
        file: PathBuf,
        /// Emit resolution/storage trace events on the diagnostic stream.
        #[arg(long)]
        trace: bool,
        /// Interpreter step budget; execution aborts when exceeded.
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: u64,
    },
    /// Parse and validate a program, printing diagnostics only.
    Check { file: PathBuf },
    /// Print the token stream.
    Tokens { file: PathBuf },
    /// Parse a program and print its canonical form.
    Ast { file: PathBuf },
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_COMPILE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            file,
            trace,
            max_steps,
        } => cmd_run(&file, trace, max_steps),
        Command::Check { file } => cmd_check(&file),
        Command::Tokens { file } => cmd_tokens(&file),
        Command::Ast { file } => cmd_ast(&file),
    }
}

fn read_source(path: &PathBuf) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: error: {}", path.display(), e);
        ExitCode::from(EXIT_USAGE)
    })
}

fn report(path: &PathBuf, diags: &[Diagnostic]) -> ExitCode {
    for d in diags {
        eprintln!("{}:{}", path.display(), d);
    }
    ExitCode::from(EXIT_COMPILE)
}

fn compile_file(path: &PathBuf) -> Result<copl::check::CheckedProgram, ExitCode> {
    let source = read_source(path)?;
    let tokens = tokenize(&source).map_err(|d| report(path, &[d]))?;
    let ast = parse(tokens).map_err(|d| report(path, &[d]))?;
    let hierarchy = build_hierarchy(&ast).map_err(|ds| report(path, &ds))?;
    check(ast, hierarchy).map_err(|ds| report(path, &ds))
}

fn cmd_run(path: &PathBuf, trace: bool, max_steps: u64) -> ExitCode {
    let program = match compile_file(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let execution = run(&program, RunOptions { trace, max_steps });

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    out.write_all(&execution.stdout).expect("write stdout");
    out.flush().expect("flush stdout");

    let stderr = std::io::stderr();
    let mut err_stream = stderr.lock();
    for line in &execution.trace {
        writeln!(err_stream, "{}", line).expect("write trace");
    }
    match execution.result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            writeln!(err_stream, "{}:{}", path.display(), e).expect("write error");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn cmd_check(path: &PathBuf) -> ExitCode {
    match compile_file(path) {
        Ok(_) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}

fn cmd_tokens(path: &PathBuf) -> ExitCode {
    let source = match read_source(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let tokens = match tokenize(&source) {
        Ok(t) => t,
        Err(d) => return report(path, &[d]),
    };
    for t in &tokens {
        let kind = match t.kind {
            TokenKind::Keyword => "keyword",
            TokenKind::Identifier => "identifier",
            TokenKind::IntLiteral => "int",
            TokenKind::FloatLiteral => "float",
            TokenKind::StrLiteral => "string",
            TokenKind::Punct => "punct",
            TokenKind::Eof => "eof",
        };
        println!("{}:{}\t{}\t{}", t.span.line, t.span.column, kind, t.lexeme.escape_default());
    }
    ExitCode::SUCCESS
}

fn cmd_ast(path: &PathBuf) -> ExitCode {
    let source = match read_source(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let tokens = match tokenize(&source) {
        Ok(t) => t,
        Err(d) => return report(path, &[d]),
    };
    let ast = match parse(tokens) {
        Ok(a) => a,
        Err(d) => return report(path, &[d]),
    };
    print!("{}", print_program(&ast));
    ExitCode::SUCCESS
}
