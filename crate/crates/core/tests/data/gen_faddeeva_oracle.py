import mpmath as mp
mp.mp.dps = 40
xs = [i*0.5 for i in range(-40, 41)]
ys = [0.0, 1e-6, 1e-3, 0.05, 0.3, 1.0, 2.0, 5.0, 10.0, 19.0]
print("# faddeeva w(z) = exp(-z^2) erfc(-iz), mpmath dps=40")
print("x,y,re,im")
for y in ys:
    for x in xs:
        if x*x + y*y > 400.0:
            continue
        z = mp.mpc(x, y)
        w = mp.exp(-z*z) * mp.erfc(-1j*z)
        print(f"{x!r},{y!r},{mp.nstr(w.real, 20, min_fixed=0, max_fixed=0)},{mp.nstr(w.imag, 20, min_fixed=0, max_fixed=0)}")
