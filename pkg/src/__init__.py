"""Analysis core: Solidity frontend, EVM disassembler, detectors, classifier."""
