fn main() {
    let mut stderr = std::io::stderr();
    std::process::exit(surprise_rr::cli::run(std::env::args_os(), &mut stderr));
}
