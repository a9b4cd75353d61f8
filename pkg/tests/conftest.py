import hypothesis

hypothesis.settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=100,
)
hypothesis.settings.load_profile("deterministic")
