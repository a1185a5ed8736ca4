fn main() {
    std::process::exit(alpha_audit_cli::main_with(std::env::args_os()));
}
