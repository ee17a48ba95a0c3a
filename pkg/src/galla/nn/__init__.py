"""Neural modules: tokenizer, graph encoder, adapters and the decoder LM."""
