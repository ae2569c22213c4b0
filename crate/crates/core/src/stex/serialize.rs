use super::node::{attr, NodeKind, StexNode};

/// Writes the canonical sTeX form of a tree.
pub fn serialize(node: &StexNode) -> String {
    let mut out = String::new();
    write_node(node, &mut out);
    out
}

pub fn serialize_nodes(nodes: &[StexNode]) -> String {
    let mut out = String::new();
    for node in nodes {
        write_node(node, &mut out);
    }
    out
}

fn write_children(node: &StexNode, out: &mut String) {
    for child in &node.children {
        write_node(child, out);
    }
}

fn write_opt(out: &mut String, value: Option<&str>) {
    if let Some(v) = value {
        out.push('[');
        out.push_str(v);
        out.push(']');
    }
}

fn write_arg(out: &mut String, value: &str) {
    out.push('{');
    out.push_str(value);
    out.push('}');
}

fn write_node(node: &StexNode, out: &mut String) {
    let a = |key| node.attr(key);
    match node.kind {
        NodeKind::Document => write_children(node, out),
        NodeKind::Text => out.push_str(a(attr::TEXT).unwrap_or_default()),
        NodeKind::Group => {
            out.push('{');
            write_children(node, out);
            out.push('}');
        }
        NodeKind::Math => {
            let delim = a(attr::DELIM).unwrap_or("$");
            let close = match delim {
                "\\[" => "\\]",
                "\\(" => "\\)",
                other => other,
            };
            out.push_str(delim);
            out.push_str(a(attr::CONTENT).unwrap_or_default());
            out.push_str(close);
        }
        NodeKind::ModuleDecl => write_env(node, "smodule", a(attr::NAME), out),
        NodeKind::Problem => write_env(node, "sproblem", None, out),
        NodeKind::MultiChoiceBlock => write_env(node, "mcb", None, out),
        NodeKind::SingleChoiceBlock => write_env(node, "scb", None, out),
        NodeKind::Environment => {
            let name = a(attr::NAME).unwrap_or_default();
            if let Some(body) = a(attr::VERBATIM) {
                out.push_str("\\begin");
                write_arg(out, name);
                out.push_str(body);
                out.push_str("\\end");
                write_arg(out, name);
            } else {
                write_env(node, name, None, out);
            }
        }
        NodeKind::UseModule => {
            out.push('\\');
            out.push_str(a(attr::MACRO).unwrap_or("usemodule"));
            write_opt(out, a(attr::ARCHIVE));
            write_arg(out, a(attr::PATH).unwrap_or_default());
        }
        NodeKind::SymbolDecl => {
            out.push_str("\\symdecl");
            out.push_str(a(attr::STAR).unwrap_or_default());
            write_arg(out, a(attr::NAME).unwrap_or_default());
            write_opt(out, a(attr::OPTS));
        }
        NodeKind::SymbolDef => {
            out.push_str("\\symdef");
            write_arg(out, a(attr::NAME).unwrap_or_default());
            write_opt(out, a(attr::OPTS));
            if let Some(n) = a(attr::NOTATION) {
                write_arg(out, n);
            }
        }
        NodeKind::SymbolRef => {
            let name = a(attr::NAME).unwrap_or_default();
            match a(attr::MACRO) {
                Some("sn") => {
                    out.push_str("\\sn");
                    write_arg(out, name);
                }
                m => {
                    out.push('\\');
                    out.push_str(m.unwrap_or("symref"));
                    write_arg(out, name);
                    write_arg(out, a(attr::VERBALIZATION).unwrap_or_default());
                }
            }
        }
        NodeKind::ChoiceOption => {
            out.push('\\');
            out.push_str(a(attr::MACRO).unwrap_or("mcc"));
            let opts = choice_options(node);
            if !opts.is_empty() {
                write_opt(out, Some(&opts));
            }
            out.push('{');
            write_children(node, out);
            out.push('}');
        }
        NodeKind::FillInSol => {
            out.push_str("\\fillinsol");
            write_opt(out, a(attr::OPTS));
            write_arg(out, a(attr::SOLUTION).unwrap_or_default());
        }
        NodeKind::Objective => {
            out.push('\\');
            out.push_str(a(attr::MACRO).unwrap_or("objective"));
            write_arg(out, a(attr::DIMENSION).unwrap_or_default());
            write_arg(out, a(attr::SYMBOL).unwrap_or_default());
        }
        NodeKind::SectionMarker => {
            out.push('\\');
            out.push_str(a(attr::MACRO).unwrap_or("section"));
            out.push_str(a(attr::STAR).unwrap_or_default());
            write_opt(out, a(attr::SHORT));
            write_arg(out, a(attr::TITLE).unwrap_or_default());
        }
    }
}

fn write_env(node: &StexNode, env: &str, name_arg: Option<&str>, out: &mut String) {
    out.push_str("\\begin");
    write_arg(out, env);
    write_opt(out, node.attr(attr::OPTS));
    if let Some(n) = name_arg {
        write_arg(out, n);
    }
    write_children(node, out);
    out.push_str("\\end");
    write_arg(out, env);
}

/// Canonical option list of a choice: truth flag, feedback, grading
/// actions, then anything else in its original order.
pub(crate) fn choice_options(node: &StexNode) -> String {
    let mut items: Vec<String> = Vec::new();
    if let Some(t) = node.attr(attr::TRUTH) {
        items.push(t.to_owned());
    }
    if let Some(f) = node.attr(attr::FEEDBACK) {
        items.push(format!("feedback={{{f}}}"));
    }
    for key in [attr::SET, attr::ADD, attr::DEDUCT] {
        if let Some(v) = node.attr(key) {
            items.push(format!("{key}={v}"));
        }
    }
    if let Some(extra) = node.attr(attr::EXTRA) {
        items.push(extra.to_owned());
    }
    items.join(",")
}
