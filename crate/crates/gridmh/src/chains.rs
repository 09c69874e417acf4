// stub
pub struct ChainTrace; pub struct Proposal; pub struct Target;
