//! One line per acceptance criterion; exits non-zero if any fails.

fn main() {
    let reports = nmqj::acceptance::run_all(0);
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
