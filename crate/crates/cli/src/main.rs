fn main() {
    std::process::exit(bean_limit_cli::run(std::env::args_os()));
}
