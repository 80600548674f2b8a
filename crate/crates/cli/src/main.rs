fn main() {
    std::process::exit(ircount_eval::run(std::env::args_os()));
}
