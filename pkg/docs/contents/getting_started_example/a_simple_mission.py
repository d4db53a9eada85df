from hydromission import load_scenario, build_scenario, Executive

config = load_scenario('scenario1')
profile = config.profile(verbose=True)

scenario = build_scenario(config, profile=profile)
print(scenario.graph)

trace = Executive(profile).run_mission(scenario)
print(trace.outcome, trace.ledger.t_mission, trace.ledger.t_residual)
for leg in trace.legs:
    print(leg.edge, leg.expected, leg.realized, leg.decision)
trace.write_jsonl('trace.jsonl')
