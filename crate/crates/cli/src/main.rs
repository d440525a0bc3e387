fn main() {
    std::process::exit(tri_ident::run(std::env::args_os()));
}
