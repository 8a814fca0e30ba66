use fmo_core::equiv::{equivalent, Backend, EquivConfig};
use fmo_core::syntax::{KContext, Type, View};

#[path = "../tests/support/mod.rs"]
mod support;
use support::TypeGen;

fn main() {
    let handle = std::thread::Builder::new().stack_size(1 << 30).spawn(|| {
        let ctx = KContext::new();
        let config = EquivConfig { backend: Backend::Grammar, ..EquivConfig::default() };
        let mut gen = TypeGen::new(0xACC2);
        for i in 0..100 {
            let t = gen.session(3);
            let u = gen.session(3);
            let v = gen.session(3);
            eprintln!("triple {i}: sizes {} {} {}", t.to_string().len(), u.to_string().len(), v.to_string().len());
            let cases = [
                (Type::semi(Type::skip(), t.clone()), t.clone()),
                (Type::semi(Type::end(), t.clone()), Type::end()),
                (Type::semi(Type::semi(t.clone(), u.clone()), v.clone()),
                 Type::semi(t.clone(), Type::semi(u.clone(), v.clone()))),
                (Type::semi(Type::choice(View::Internal, vec![("Go".into(), t.clone()), ("Quit".into(), u.clone())]), v.clone()),
                 Type::choice(View::Internal, vec![("Go".into(), Type::semi(t.clone(), v.clone())), ("Quit".into(), Type::semi(u.clone(), v.clone()))])),
            ];
            for (k, (lhs, rhs)) in cases.iter().enumerate() {
                let t0 = std::time::Instant::now();
                let verdict = equivalent(&ctx, lhs, rhs, &config).expect("kinded");
                if t0.elapsed().as_millis() > 500 { eprintln!("  axiom {k}: SLOW {:?}", t0.elapsed()); }
                assert!(verdict.is_bisimilar(), "triple {i} axiom {k}: {verdict}");
            }
        }
        eprintln!("all done");
    }).unwrap();
    handle.join().unwrap();
}
