"""Smoke test for the qinc extension module.

Build and install first, e.g. `maturin build --release -m crates/py/Cargo.toml`
followed by `pip install target/wheels/qinc-*.whl`, then run this file.
"""

import math

import qinc


def check_quantum():
    # RX(x) on |0>: <Z> = cos(x); a single 0->1 CNOT on two qubits.
    z = qinc.quantum_forward([0.3, 0.0], [[0.0, 0.0]])
    assert abs(z[0] - math.cos(0.3)) < 1e-12, z
    assert abs(z[1] - math.cos(0.3)) < 1e-12, z

    inputs, weights = [0.1, -0.4, 0.9], [[0.2, 1.1, -0.7]]
    d_inputs, d_weights = qinc.quantum_gradients(inputs, weights)
    h = 1e-6
    for i in range(3):
        plus = list(inputs)
        minus = list(inputs)
        plus[i] += h
        minus[i] -= h
        fp, fm = qinc.quantum_forward(plus, weights), qinc.quantum_forward(minus, weights)
        for j in range(3):
            assert abs(d_inputs[i][j] - (fp[j] - fm[j]) / (2 * h)) < 1e-6
    assert len(d_weights) == 1 and len(d_weights[0]) == 3


def check_data():
    records, schedule = qinc.generate(n_zones=6, duration_s=120, seed=2, n_incidents=1)
    assert records and len(schedule) == 1
    assert set(schedule[0]) == {"zone", "start_s", "duration_s"}
    x, y = qinc.features(n_zones=6, duration_s=120, seed=2)
    assert len(x) == 6 * 120 and len(x[0]) == 6

    (train_x, train_y), (test_x, test_y) = qinc.prepare_split("DS-3")
    assert (len(train_x), len(test_x)) == (150, 1250)
    assert all(0.0 <= v <= 1.0 for row in train_x for v in row)
    return train_x, train_y


def check_metrics():
    m = qinc.metrics(1, 0, 17, 1250)
    assert m["precision"] == 1.0
    assert abs(m["recall"] - 1 / 18) < 1e-12
    undefined = qinc.metrics(0, 0, 18, 1250)
    assert undefined["precision"] is None and undefined["f2"] is None


def check_model(train_x, train_y):
    assert qinc.Model("hybrid-4q").n_params == 2065
    assert qinc.Model("classical").n_params == 1937
    model = qinc.Model("hybrid-2q", seed=1)
    assert model.n_params == 1981
    p = model.forward(train_x[0])
    assert 0.0 < p < 1.0
    history = model.train(train_x, train_y, epochs=2)
    assert [h["epoch"] for h in history] == [1, 2]
    clone = qinc.Model.from_json(model.to_json())
    assert clone.forward(train_x[3]) == model.forward(train_x[3])
    assert model.predict(train_x[0]) in (0, 1)


def check_experiment():
    a = qinc.run_experiment(split="DS-3", model="classical", n_runs=2, epochs=2)
    b = qinc.run_experiment(split="DS-3", model="classical", n_runs=2, epochs=2)
    assert a == b
    assert a["n_runs"] == 2 and len(a["per_run"]) == 2
    suites = qinc.gradcheck(seed=0)
    assert all(s["passed"] for s in suites), suites


def main():
    check_quantum()
    train_x, train_y = check_data()
    check_metrics()
    check_model(train_x, train_y)
    check_experiment()
    print("qinc", qinc.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
