use super::{NodeId, Op, QuantifiedFormula, Span, SpanEntry};

// Binding strength, loosest first. `U`/`R` always print their own
// parentheses and therefore sit at the primary level.
const IFF: u8 = 1;
const IMPLIES: u8 = 2;
const OR: u8 = 3;
const AND: u8 = 4;
const UNARY: u8 = 6;
const PRIMARY: u8 = 7;

fn level(op: &Op) -> u8 {
    match op {
        Op::Iff => IFF,
        Op::Implies => IMPLIES,
        Op::Or => OR,
        Op::And => AND,
        Op::Not | Op::Next | Op::Globally | Op::Eventually => UNARY,
        Op::Until | Op::Release | Op::Atom(_) => PRIMARY,
    }
}

struct Renderer<'a> {
    f: &'a QuantifiedFormula,
    out: String,
    spans: Vec<Span>,
}

impl Renderer<'_> {
    fn emit(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn node(&mut self, id: NodeId, min_level: u8) {
        let n = self.f.node(id);
        let wrap = level(&n.op) < min_level;
        let start = self.out.len();
        if wrap {
            self.emit("(");
        }
        match &n.op {
            Op::Atom(a) => {
                let s = a.to_string();
                self.emit(&s);
            }
            Op::Not | Op::Next | Op::Globally | Op::Eventually => {
                let sym = match n.op {
                    Op::Not => "!",
                    Op::Next => "X ",
                    Op::Globally => "G ",
                    _ => "F ",
                };
                self.emit(sym);
                self.node(n.child(0), UNARY);
            }
            Op::Until | Op::Release => {
                let sym = if n.op == Op::Until { " U " } else { " R " };
                self.emit("(");
                self.node(n.child(0), UNARY);
                self.emit(sym);
                self.node(n.child(1), UNARY);
                self.emit(")");
            }
            Op::And | Op::Or | Op::Implies | Op::Iff => {
                let (sym, left, right) = match n.op {
                    Op::And => (" & ", AND, AND + 1),
                    Op::Or => (" | ", OR, OR + 1),
                    Op::Implies => (" -> ", IMPLIES + 1, IMPLIES),
                    _ => (" <-> ", IFF, IFF + 1),
                };
                self.node(n.child(0), left);
                self.emit(sym);
                self.node(n.child(1), right);
            }
        }
        if wrap {
            self.emit(")");
        }
        self.spans[id.0] = Span { start, end: self.out.len() };
    }
}

pub(super) fn render_with_spans(f: &QuantifiedFormula) -> (String, Vec<Span>) {
    let mut r = Renderer { f, out: String::new(), spans: vec![Span::default(); f.nodes().len()] };
    for b in f.prefix() {
        r.emit(b.quantifier.keyword());
        r.emit(" ");
        r.emit(&b.var);
        r.emit(". ");
    }
    r.node(NodeId(0), IFF);
    (r.out, r.spans)
}

/// Canonical single-line rendering with its span table.
pub fn render_formula(f: &QuantifiedFormula) -> (String, Vec<SpanEntry>) {
    (f.text().to_string(), f.span_table())
}

/// Whitespace-separated prefix notation, one token per quantifier, operator
/// or atom: `Forall Forall Implies G Iff i[p] i[q] G Iff o[p] o[q]`.
pub fn to_polish(f: &QuantifiedFormula) -> String {
    let mut toks: Vec<String> = f
        .prefix()
        .iter()
        .map(|b| match b.quantifier {
            super::Quantifier::Forall => "Forall".to_string(),
            super::Quantifier::Exists => "Exists".to_string(),
        })
        .collect();
    // Preorder ids make the arena order exactly the prefix-notation order.
    for n in f.nodes() {
        toks.push(match &n.op {
            Op::Atom(a) => a.to_string(),
            Op::Not => "Not".into(),
            Op::And => "And".into(),
            Op::Or => "Or".into(),
            Op::Implies => "Implies".into(),
            Op::Iff => "Iff".into(),
            Op::Next => "X".into(),
            Op::Globally => "G".into(),
            Op::Eventually => "F".into(),
            Op::Until => "U".into(),
            Op::Release => "R".into(),
        });
    }
    toks.join(" ")
}
