fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(barrier_lab::cli::run(&argv));
}
