fn main() {
    std::process::exit(mblbfgs::main_with_args(std::env::args_os()));
}
