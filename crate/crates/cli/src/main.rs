use odr_core::bench::CountingAlloc;
use odr_core::learner::Registry;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

fn main() {
    let registry = Registry::with_builtins();
    let code = odr_cli::run(
        std::env::args_os(),
        &registry,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
