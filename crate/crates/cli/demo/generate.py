import json, random
rng = random.Random(7)
groups = {
  "storefront": ["catalog","frontend","search"],
  "ordering": ["basket","checkout","invoicing","orders","payments","shipping"],
  "ops": ["audit","identity","notify"],
}
privacy = {"storefront":"public","ordering":"pii","ops":"internal"}
oper = {"storefront":"edge","ordering":"core","ops":"core"}
meta=[]
for g, svcs in groups.items():
    for s in svcs:
        meta.append({"id":s,"privacy":privacy[g],"function":g,"operational":oper[g]})
meta.sort(key=lambda m:m["id"])
def dump(obj, path):
    with open(path,"w") as f:
        json.dump(obj, f, indent=2); f.write("\n")
dump(meta, "meta.json")
group_of = {s:g for g,ss in groups.items() for s in ss}
allsvc = sorted(group_of)
lines=[]
for t in range(0, 60000, 500):
    for _ in range(3):
        g = rng.choice(list(groups))
        a, b = rng.sample(groups[g], 2)
        lines.append({"sender":a,"receiver":b,"bytes":rng.randint(2000,8000),"count":rng.randint(2,6),"timestamp":t+rng.randint(0,499)})
    if t % 2000 == 0:
        a, b = rng.sample(allsvc, 2)
        if group_of[a] != group_of[b]:
            lines.append({"sender":a,"receiver":b,"bytes":rng.randint(100,400),"count":1,"timestamp":t+rng.randint(0,499)})
for ts in (60000, 61234, 75000):
    lines.append({"sender":"frontend","receiver":"audit","bytes":99999,"count":50,"timestamp":ts})
lines.sort(key=lambda r:r["timestamp"])
with open("trace.jsonl","w") as f:
    for r in lines: f.write(json.dumps(r, separators=(",",":"))+"\n")
nodes=["n1","n2","n3"]
dump({"nodes":nodes,"assignment":{s:nodes[i%3] for i,s in enumerate(allsvc)}}, "baseline_placement.json")
dump({"k":3,"window":{"start":0,"end":60000},"nodes":nodes,"meta":"meta.json",
  "latency_model":{"local_ms":0.5,"remote_ms":5.0}}, "config.json")
