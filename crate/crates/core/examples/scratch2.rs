#[path = "../tests/support/mod.rs"]
mod support;
use support::TypeGen;
use fmo_core::gbisim::{grammar_bisim, GrammarCaps};
use fmo_core::grammar::{GrammarBuilder, GrammarDump};
use fmo_core::rename;
use fmo_core::syntax::Type;

fn main() {
    let mut gen = TypeGen::new(0xACC2);
    let mut triples = Vec::new();
    for _ in 0..=25 { triples.push((gen.session(3), gen.session(3), gen.session(3))); }
    let (t, u, v) = triples.pop().unwrap();
    println!("T = {t}\nU = {u}\nV = {v}");
    use fmo_core::syntax::View;
    let lhs = Type::semi(Type::choice(View::Internal, vec![("Go".into(), t.clone()), ("Quit".into(), u.clone())]), v.clone());
    let rhs = Type::choice(View::Internal, vec![("Go".into(), Type::semi(t.clone(), v.clone())), ("Quit".into(), Type::semi(u.clone(), v.clone()))]);
    let mut b = GrammarBuilder::new();
    let wl = b.word(&rename(&lhs)).unwrap();
    let wr = b.word(&rename(&rhs)).unwrap();
    println!("wl = {wl:?}\nwr = {wr:?}");
    println!("{}", GrammarDump::new(b.grammar(), &wl).to_text());
    let t0 = std::time::Instant::now();
    let verdict = grammar_bisim(b.grammar(), &wl, &wr, GrammarCaps::default());
    println!("verdict: {verdict} in {:?}", t0.elapsed());
}
