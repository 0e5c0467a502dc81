//! Seeded random program generators for the acceptance suite.

use rand::rngs::StdRng;
use rand::Rng;

use super::oracle::OValue;

const LETTERS: &[u8] = b"ABCDEFGHJKMNPQRSTUVWXYZ";

fn letter(rng: &mut StdRng) -> char {
    LETTERS[rng.random_range(0..LETTERS.len())] as char
}

/// A double literal that is exactly representable and survives the
/// shortest-round-trip rendering unchanged.
fn double_literal(rng: &mut StdRng) -> String {
    let whole = rng.random_range(0..20);
    let frac = ["0", "25", "5", "75"][rng.random_range(0..4)];
    format!("{whole}.{frac}")
}

fn cmp_op(rng: &mut StdRng) -> &'static str {
    ["<", ">", "==", "!="][rng.random_range(0..4)]
}

fn add_op(rng: &mut StdRng) -> &'static str {
    ["+", "-"][rng.random_range(0..2)]
}

/// A random program built only from parent-less classes; both the real
/// interpreter and the direct-dispatch oracle can run it.
pub fn class_only(rng: &mut StdRng) -> String {
    let holders = rng.random_range(1..=2);
    let mut src = String::new();
    for i in 0..holders {
        let a = rng.random_range(0..50);
        let w = double_literal(rng);
        let op = add_op(rng);
        src.push_str(&format!(
            "class Holder{i} {{\n\
             \x20   int a = {a};\n\
             \x20   double w = {w};\n\
             \x20   int get() {{ return a; }}\n\
             \x20   void set(int v) {{ a = v; }}\n\
             \x20   int mix(int x) {{ return a {op} x; }}\n\
             \x20   double scale(double d) {{ return w {op} d; }}\n\
             }}\n\n"
        ));
    }
    src.push_str("class Main {\n    void main() {\n");
    for i in 0..holders {
        src.push_str(&format!("        Holder{i} h{i} = new Holder{i}();\n"));
    }
    let seed = rng.random_range(0..30);
    src.push_str(&format!("        int acc = {seed};\n"));
    for i in 0..holders {
        let r = rng.random_range(0..40);
        let op = add_op(rng);
        src.push_str(&format!("        acc = acc {op} h{i}.mix({r});\n"));
        src.push_str(&format!("        h{i}.set(acc);\n"));
    }
    src.push_str(if rng.random_bool(0.5) {
        "        acc++;\n"
    } else {
        "        acc--;\n"
    });
    let threshold = rng.random_range(0..60);
    let cmp = cmp_op(rng);
    if rng.random_bool(0.5) {
        src.push_str(&format!(
            "        if (acc {cmp} {threshold}) print(\"yes\\n\"); else print(\"no\\n\");\n"
        ));
    } else {
        src.push_str(&format!(
            "        if (acc {cmp} {threshold}) print(\"yes\\n\");\n"
        ));
    }
    for i in 0..holders {
        src.push_str(&format!("        print(h{i}.get());\n        print(\"\\n\");\n"));
    }
    let d = double_literal(rng);
    let inc = double_literal(rng);
    src.push_str(&format!("        double d = h0.scale({d});\n"));
    src.push_str(&format!("        d += {inc};\n"));
    src.push_str("        print(d);\n        print(\"\\n\");\n");
    src.push_str("        print(acc);\n        print(\"\\n\");\n");
    src.push_str("    }\n}\n");
    src
}

pub struct NestingProgram {
    pub source: String,
    pub expected_stdout: String,
    pub invocations: usize,
}

/// Emits the seeding statements that build one context object per layer
/// and register each under its parent's map, then the flat key list for
/// the reference constructor.
fn spine(layers: &[String], target: &str, keys: &[String]) -> String {
    let mut src = String::new();
    let mut prev: Option<String> = None;
    for (i, _) in layers.iter().enumerate().skip(1) {
        let var = format!("o{i}");
        src.push_str(&format!("        Root {var} = new {}();\n", layers[i]));
        match &prev {
            None => src.push_str(&format!(
                "        {}.reg.put(\"{}\", {var});\n",
                layers[0], keys[0]
            )),
            Some(p) => src.push_str(&format!(
                "        {p}.reg.put(\"{}\", {var});\n",
                keys[i - 1]
            )),
        }
        prev = Some(var);
    }
    src.push_str(&format!("        Root leaf = new {target}();\n"));
    match &prev {
        None => src.push_str(&format!(
            "        {}.reg.put(\"{}\", leaf);\n",
            layers[0],
            keys[0]
        )),
        Some(p) => src.push_str(&format!(
            "        {p}.reg.put(\"{}\", leaf);\n",
            keys[layers.len() - 1]
        )),
    }
    src
}

fn key_list(keys: &[String]) -> String {
    keys.iter()
        .map(|k| format!("\"{k}\""))
        .collect::<Vec<_>>()
        .join(", ")
}

fn layer_decl(
    name: &str,
    parent: Option<&str>,
    enter: Option<&str>,
    exit: Option<&str>,
) -> String {
    let header = match parent {
        None => format!("concept {name}"),
        Some(p) => format!("concept {name} in {p}"),
    };
    let reg = if parent.is_none() {
        "static Map reg.create();"
    } else {
        "Map reg.create();"
    };
    let mut body = String::new();
    if let Some(line) = enter {
        body.push_str(&format!("      print(\"{line}\\n\");\n"));
    }
    body.push_str("      Root r = context.reg.get(id);\n      r.continue();\n");
    if let Some(line) = exit {
        body.push_str(&format!("      print(\"{line}\\n\");\n"));
    }
    format!(
        "{header}\n\
         \x20 class {{\n    {reg}\n  }}\n\
         \x20 reference {{\n    String id;\n    void continue() {{\n{body}    }}\n  }}\n\n"
    )
}

/// A depth-N hierarchy whose continues announce themselves; the expected
/// output is the hand-expanded enter/exit nesting around each call.
pub fn nesting(rng: &mut StdRng, depth: usize) -> NestingProgram {
    let tag = letter(rng);
    let layers: Vec<String> = (0..depth).map(|i| format!("Layer{i}{tag}")).collect();
    let target = format!("Leaf{tag}");
    let keys: Vec<String> = (0..depth)
        .map(|i| format!("k{i}{}", letter(rng)))
        .collect();
    let planted = rng.random_range(0..100);
    let invocations = rng.random_range(1..=3);
    let shared_ref = rng.random_bool(0.5);

    let mut src = String::new();
    for (i, name) in layers.iter().enumerate() {
        let parent = (i > 0).then(|| layers[i - 1].as_str());
        src.push_str(&layer_decl(
            name,
            parent,
            Some(&format!("> enter {name}")),
            Some(&format!("< exit {name}")),
        ));
    }
    src.push_str(&format!(
        "class {target} in {} {{\n\
         \x20   int planted = {planted};\n\
         \x20   int probe() {{\n        print(\"* business\\n\");\n        return planted;\n    }}\n\
         }}\n\n",
        layers[depth - 1]
    ));
    src.push_str("class Main {\n    void main() {\n");
    src.push_str(&spine(&layers, &target, &keys));
    if shared_ref {
        src.push_str(&format!(
            "        {target} ref = {target}@({});\n",
            key_list(&keys)
        ));
    }
    for j in 0..invocations {
        if shared_ref {
            src.push_str(&format!("        int g{j} = ref.probe();\n"));
        } else {
            src.push_str(&format!(
                "        int g{j} = {target}@({}).probe();\n",
                key_list(&keys)
            ));
        }
        src.push_str(&format!("        print(g{j});\n        print(\"\\n\");\n"));
    }
    src.push_str("    }\n}\n");

    let mut expected = String::new();
    for _ in 0..invocations {
        for name in &layers {
            expected.push_str(&format!("> enter {name}\n"));
        }
        expected.push_str("* business\n");
        for name in layers.iter().rev() {
            expected.push_str(&format!("< exit {name}\n"));
        }
        expected.push_str(&format!("{planted}\n"));
    }

    NestingProgram {
        source: src,
        expected_stdout: expected,
        invocations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BusinessKind {
    Int,
    Double,
    Str,
}

pub struct ReturnProgram {
    pub source: String,
    pub target: String,
    /// The calls Main makes through the reference, in order. The last one
    /// returns the printed value.
    pub script: Vec<(String, Vec<OValue>)>,
}

/// A depth-N hierarchy with silent continues and a value-carrying business
/// class; the printed result must match a direct evaluation of the same
/// script.
pub fn returning(rng: &mut StdRng, depth: usize, kind: BusinessKind) -> ReturnProgram {
    let tag = letter(rng);
    let layers: Vec<String> = (0..depth).map(|i| format!("Step{i}{tag}")).collect();
    let target = format!("Cell{tag}");
    let keys: Vec<String> = (0..depth).map(|i| format!("q{i}")).collect();

    let mut src = String::new();
    for (i, name) in layers.iter().enumerate() {
        let parent = (i > 0).then(|| layers[i - 1].as_str());
        src.push_str(&layer_decl(name, parent, None, None));
    }
    let (ty, field_init) = match kind {
        BusinessKind::Int => ("int", rng.random_range(-20..100).to_string()),
        BusinessKind::Double => ("double", double_literal(rng)),
        BusinessKind::Str => (
            "String",
            format!("\"tok{}\"", rng.random_range(0..1000)),
        ),
    };
    let mut script: Vec<(String, Vec<OValue>)> = Vec::new();

    let mut methods = format!(
        "    {ty} get() {{ return v; }}\n    void set({ty} x) {{ v = x; }}\n"
    );
    if kind != BusinessKind::Str {
        methods.push_str(&format!(
            "    {ty} addTo({ty} x) {{ return v + x; }}\n"
        ));
    }
    src.push_str(&format!(
        "class {target} in {} {{\n    {ty} v = {field_init};\n{methods}}}\n\n",
        layers[depth - 1]
    ));

    // Randomly extend the script; it always ends in a value-returning call.
    match kind {
        BusinessKind::Str => {
            if rng.random_bool(0.5) {
                let s = format!("alt{}", rng.random_range(0..1000));
                script.push(("set".to_string(), vec![OValue::Str(s)]));
            }
            script.push(("get".to_string(), vec![]));
        }
        BusinessKind::Int => {
            if rng.random_bool(0.5) {
                let a = rng.random_range(0..50);
                script.push(("set".to_string(), vec![OValue::Int(a)]));
            }
            if rng.random_bool(0.5) {
                let b = rng.random_range(0..50);
                script.push(("addTo".to_string(), vec![OValue::Int(b)]));
            } else {
                script.push(("get".to_string(), vec![]));
            }
        }
        BusinessKind::Double => {
            if rng.random_bool(0.5) {
                let lit: f64 = double_literal(rng).parse().unwrap();
                script.push(("set".to_string(), vec![OValue::Double(lit)]));
            }
            if rng.random_bool(0.5) {
                let lit: f64 = double_literal(rng).parse().unwrap();
                script.push(("addTo".to_string(), vec![OValue::Double(lit)]));
            } else {
                script.push(("get".to_string(), vec![]));
            }
        }
    }

    src.push_str("class Main {\n    void main() {\n");
    src.push_str(&spine(&layers, &target, &keys));
    src.push_str(&format!(
        "        {target} ref = {target}@({});\n",
        key_list(&keys)
    ));
    for (j, (method, args)) in script.iter().enumerate() {
        let rendered_args: Vec<String> = args.iter().map(arg_source).collect();
        let call = format!("ref.{method}({})", rendered_args.join(", "));
        if j + 1 == script.len() {
            src.push_str(&format!("        {ty} out = {call};\n"));
            src.push_str("        print(out);\n        print(\"\\n\");\n");
        } else {
            src.push_str(&format!("        {call};\n"));
        }
    }
    src.push_str("    }\n}\n");

    ReturnProgram {
        source: src,
        target,
        script,
    }
}

fn arg_source(v: &OValue) -> String {
    match v {
        OValue::Int(n) | OValue::Long(n) => n.to_string(),
        OValue::Double(d) => {
            let text = format!("{}", d);
            if text.contains('.') {
                text
            } else {
                format!("{text}.0")
            }
        }
        OValue::Str(s) => format!("\"{s}\""),
        other => panic!("cannot render argument {other:?}"),
    }
}
