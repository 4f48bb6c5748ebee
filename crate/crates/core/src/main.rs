fn main() {
    std::process::exit(meairl_core::harness::cli_run(std::env::args_os()));
}
